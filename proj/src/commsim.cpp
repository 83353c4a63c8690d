/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "distsketch/commsim.hpp"

#include <exception>
#include <thread>

namespace distsketch {

namespace {

// Which server's step is executing on this thread. 0 is the coordinator,
// kNobody means no step is in flight.
constexpr int kNobody = -1;
thread_local int tl_current = kNobody;

struct StepScope {
  explicit StepScope(int who) { tl_current = who; }
  ~StepScope() { tl_current = kNobody; }
};

}  // namespace

void CommLedger::record(int round, int server_id, Direction dir, std::uint64_t words) {
  entries_.push_back({round, server_id, dir, words});
  total_words_ += words;
}

LedgerSummary CommLedger::summary() const {
  LedgerSummary s;
  s.rounds = rounds_;
  s.total_words = total_words_;
  s.words_by_round.assign(static_cast<std::size_t>(rounds_), 0);
  for (const auto& e : entries_) {
    s.words_by_round[static_cast<std::size_t>(e.round) - 1] += e.words;
    s.words_by_server[e.server_id] += e.words;
  }
  return s;
}

nlohmann::json CommLedger::summary_json() const {
  const LedgerSummary s = summary();
  nlohmann::json by_server = nlohmann::json::object();
  for (const auto& [id, w] : s.words_by_server) by_server[std::to_string(id)] = w;
  return nlohmann::json{{"rounds", s.rounds},
                        {"total_words", s.total_words},
                        {"words_by_round", s.words_by_round},
                        {"words_by_server", by_server}};
}

std::uint64_t CommLedger::bit_estimate(int b, std::uint64_t domain_size) const {
  std::uint64_t log2d = 0;
  while ((1ULL << log2d) < domain_size) ++log2d;
  return total_words_ * (static_cast<std::uint64_t>(b) + log2d);
}

void Message::put_matrix(const Matrix& m) {
  indices_.push_back(m.rows());
  indices_.push_back(m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) values_.push_back(m(i, j));
}

double Message::get_value() {
  if (vpos_ >= values_.size()) throw ProtocolError("Message: value channel exhausted");
  return values_[vpos_++];
}

std::int64_t Message::get_index() {
  if (ipos_ >= indices_.size()) throw ProtocolError("Message: index channel exhausted");
  return indices_[ipos_++];
}

SketchSeed Message::get_seed() {
  if (spos_ >= seeds_.size()) throw ProtocolError("Message: seed channel exhausted");
  return seeds_[spos_++];
}

Matrix Message::get_matrix() {
  const std::int64_t rows = get_index();
  const std::int64_t cols = get_index();
  if (rows < 0 || cols < 0) throw ProtocolError("Message: negative matrix dims");
  if (values_.size() - vpos_ < static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw ProtocolError("Message: matrix payload exhausted");
  Matrix m(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = values_[vpos_++];
  return m;
}

std::uint64_t Message::word_count() const {
  std::uint64_t w = values_.size() + indices_.size();
  for (const auto& s : seeds_) w += s.word_count();
  return w;
}

int CoordinatorContext::server_count() const { return fabric_.server_count(); }

Message& CoordinatorContext::reply_from(int server_id) {
  if (tl_current != 0) throw IsolationError("reply_from outside the coordinator step");
  fabric_.check_server_id(server_id);
  return fabric_.replies_[static_cast<std::size_t>(server_id) - 1];
}

void CoordinatorContext::send(int server_id, Message m) {
  if (tl_current != 0) throw IsolationError("send outside the coordinator step");
  fabric_.check_server_id(server_id);
  auto idx = static_cast<std::size_t>(server_id) - 1;
  if (fabric_.sent_[idx]) throw ProtocolError("send: duplicate message to server in one round");
  fabric_.to_servers_[idx] = std::move(m);
  fabric_.sent_[idx] = true;
}

void CoordinatorContext::broadcast(const Message& m) {
  for (int t = 1; t <= fabric_.server_count(); ++t) send(t, m);
}

void CoordinatorContext::halt() {
  if (tl_current != 0) throw IsolationError("halt outside the coordinator step");
  halted_ = true;
}

Message& ServerContext::inbox() {
  if (tl_current != id_) throw IsolationError("inbox access from the wrong execution scope");
  return fabric_.to_servers_[static_cast<std::size_t>(id_) - 1];
}

void ServerContext::reply(Message m) {
  if (tl_current != id_) throw IsolationError("reply from the wrong execution scope");
  auto idx = static_cast<std::size_t>(id_) - 1;
  if (fabric_.replied_[idx]) throw ProtocolError("reply: duplicate reply in one round");
  fabric_.replies_[idx] = std::move(m);
  fabric_.replied_[idx] = true;
}

Fabric::Fabric(int num_servers, std::uint64_t master_seed, Options options)
    : num_servers_(num_servers), master_seed_(master_seed), options_(options) {
  if (num_servers < 1) throw std::invalid_argument("Fabric: need at least one server");
  states_.resize(static_cast<std::size_t>(num_servers));
}

void Fabric::check_not_running(const char* what) const {
  if (running_) throw ProtocolError(std::string(what) + ": fabric is mid-run");
}

void Fabric::check_server_id(int server_id) const {
  if (server_id < 1 || server_id > num_servers_)
    throw std::invalid_argument("server id out of range");
}

std::any& Fabric::audited_state(int server_id) {
  check_server_id(server_id);
  if (tl_current != server_id)
    throw IsolationError("server state touched outside the owning server's step");
  auto& slot = states_[static_cast<std::size_t>(server_id) - 1];
  if (!slot) slot = std::make_shared<std::any>();
  return *slot;
}

CommLedger Fabric::run(Protocol& protocol) {
  const int bound = protocol.max_rounds();
  if (bound < 1) throw std::invalid_argument("Fabric::run: round bound must be positive");
  ledger_ = CommLedger{};
  replies_.assign(static_cast<std::size_t>(num_servers_), Message{});
  running_ = true;
  bool halted = false;
  int completed = 0;
  try {
    for (int r = 1; r <= bound && !halted; ++r) {
      to_servers_.assign(static_cast<std::size_t>(num_servers_), Message{});
      sent_.assign(static_cast<std::size_t>(num_servers_), false);
      CoordinatorContext cctx(*this, r, derive_key(master_seed_, 0, static_cast<std::uint64_t>(r)));
      {
        StepScope scope(0);
        protocol.coordinator_step(cctx);
      }
      if (cctx.halted()) {
        for (bool s : sent_)
          if (s) throw ProtocolError("coordinator halted after sending in the same round");
        halted = true;
        break;
      }
      for (int t = 1; t <= num_servers_; ++t) {
        const std::uint64_t w = to_servers_[static_cast<std::size_t>(t) - 1].word_count();
        if (w > 0) ledger_.record(r, t, Direction::CoordinatorToServer, w);
      }
      replies_.assign(static_cast<std::size_t>(num_servers_), Message{});
      replied_.assign(static_cast<std::size_t>(num_servers_), false);
      if (options_.parallel && num_servers_ > 1) {
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(num_servers_));
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(num_servers_));
        for (int t = 1; t <= num_servers_; ++t) {
          threads.emplace_back([&, t] {
            StepScope scope(t);
            ServerContext sctx(*this, t, r,
                               derive_key(master_seed_, static_cast<std::uint64_t>(t),
                                          static_cast<std::uint64_t>(r)));
            try {
              protocol.server_step(sctx);
            } catch (...) {
              errors[static_cast<std::size_t>(t) - 1] = std::current_exception();
            }
          });
        }
        for (auto& th : threads) th.join();
        for (const auto& e : errors)
          if (e) std::rethrow_exception(e);
      } else {
        for (int t = 1; t <= num_servers_; ++t) {
          StepScope scope(t);
          ServerContext sctx(*this, t, r,
                             derive_key(master_seed_, static_cast<std::uint64_t>(t),
                                        static_cast<std::uint64_t>(r)));
          protocol.server_step(sctx);
        }
      }
      for (int t = 1; t <= num_servers_; ++t) {
        const std::uint64_t w = replies_[static_cast<std::size_t>(t) - 1].word_count();
        if (w > 0) ledger_.record(r, t, Direction::ServerToCoordinator, w);
      }
      completed = r;
    }
  } catch (...) {
    running_ = false;
    throw;
  }
  running_ = false;
  if (!halted)
    throw RoundBoundError("coordinator did not halt within its declared bound of " +
                          std::to_string(bound) + " rounds");
  ledger_.set_rounds(completed);
  return ledger_;
}

}  // namespace distsketch
