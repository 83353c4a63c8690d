/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <any>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "distsketch/linalg.hpp"
#include "distsketch/rng.hpp"
#include "distsketch/sketch.hpp"

#include <nlohmann/json.hpp>

namespace distsketch {

// The fabric simulates one coordinator (server 0) talking to data servers
// 1..s in synchronous rounds. A round is one coordinator broadcast followed
// by one reply per server; there are no server-to-server edges. Every
// transmitted index or numeric value is one word; a serialized sketch seed
// counts t + 4 words; a matrix counts rows*cols values plus 2 dimension
// words.

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A server step touched state it does not own.
class IsolationError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// The coordinator never halted within the declared round bound.
class RoundBoundError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

enum class Direction { CoordinatorToServer, ServerToCoordinator };

struct LedgerEntry {
  int round = 0;
  int server_id = 0;  // the data-server end of the edge
  Direction direction = Direction::CoordinatorToServer;
  std::uint64_t words = 0;
};

struct LedgerSummary {
  int rounds = 0;
  std::uint64_t total_words = 0;
  std::vector<std::uint64_t> words_by_round;      // index r-1 holds round r
  std::map<int, std::uint64_t> words_by_server;   // per data server
};

class CommLedger {
 public:
  void record(int round, int server_id, Direction dir, std::uint64_t words);
  void set_rounds(int rounds) { rounds_ = rounds; }

  int rounds() const { return rounds_; }
  std::uint64_t total_words() const { return total_words_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }

  LedgerSummary summary() const;
  nlohmann::json summary_json() const;

  // Derived size if every word were b bits plus an index tag for a domain of
  // the given size: total_words * (b + ceil(log2(domain))). Reported only.
  std::uint64_t bit_estimate(int b, std::uint64_t domain_size) const;

 private:
  std::vector<LedgerEntry> entries_;
  std::uint64_t total_words_ = 0;
  int rounds_ = 0;
};

// Payload with typed channels so word accounting is structural. Values and
// indices are read back in FIFO order per channel.
class Message {
 public:
  void put_value(double v) { values_.push_back(v); }
  void put_index(std::int64_t i) { indices_.push_back(i); }
  void put_seed(SketchSeed s) { seeds_.push_back(std::move(s)); }
  void put_matrix(const Matrix& m);

  double get_value();
  std::int64_t get_index();
  SketchSeed get_seed();
  Matrix get_matrix();

  std::uint64_t word_count() const;
  bool empty() const { return values_.empty() && indices_.empty() && seeds_.empty(); }
  std::size_t remaining_values() const { return values_.size() - vpos_; }
  std::size_t remaining_indices() const { return indices_.size() - ipos_; }

 private:
  std::vector<double> values_;
  std::vector<std::int64_t> indices_;
  std::vector<SketchSeed> seeds_;
  std::size_t vpos_ = 0, ipos_ = 0, spos_ = 0;
};

class Fabric;

class CoordinatorContext {
 public:
  int round() const { return round_; }
  int server_count() const;
  // Replies from the previous round; empty messages on round 1.
  Message& reply_from(int server_id);
  void send(int server_id, Message m);
  void broadcast(const Message& m);
  void halt();
  bool halted() const { return halted_; }
  Rng& rng() { return rng_; }

 private:
  friend class Fabric;
  CoordinatorContext(Fabric& f, int round, std::uint64_t key)
      : fabric_(f), round_(round), rng_(key) {}
  Fabric& fabric_;
  int round_;
  Rng rng_;
  bool halted_ = false;
};

class ServerContext {
 public:
  int round() const { return round_; }
  int server_id() const { return id_; }
  Message& inbox();
  void reply(Message m);
  Rng& rng() { return rng_; }

  // Server-local state, audited: accessible only while this server's step is
  // executing on this thread.
  template <typename T>
  T& state();

 private:
  friend class Fabric;
  ServerContext(Fabric& f, int id, int round, std::uint64_t key)
      : fabric_(f), id_(id), round_(round), rng_(key) {}
  Fabric& fabric_;
  int id_;
  int round_;
  Rng rng_;
};

class Protocol {
 public:
  virtual ~Protocol() = default;
  // Finite declared bound; exceeding it aborts the run.
  virtual int max_rounds() const = 0;
  // Round r: coordinator first (sees round r-1 replies), then every server.
  virtual void coordinator_step(CoordinatorContext& ctx) = 0;
  virtual void server_step(ServerContext& ctx) = 0;
};

struct FabricOptions {
  bool parallel = false;  // run server steps on threads; results identical
};

class Fabric {
 public:
  using Options = FabricOptions;

  Fabric(int num_servers, std::uint64_t master_seed, Options options = {});

  // Install per-server state before a run. Only that server's steps may
  // touch it afterwards.
  template <typename T>
  void install_state(int server_id, T value) {
    check_not_running("install_state");
    check_server_id(server_id);
    states_[static_cast<std::size_t>(server_id) - 1] = std::make_shared<std::any>(std::move(value));
  }

  // Extract state after a completed run (coordinator-side bookkeeping).
  template <typename T>
  T& state_after_run(int server_id) {
    check_not_running("state_after_run");
    check_server_id(server_id);
    auto& slot = states_[static_cast<std::size_t>(server_id) - 1];
    if (!slot || !slot->has_value()) throw ProtocolError("state_after_run: no state installed");
    return *std::any_cast<T>(slot.get());
  }

  int server_count() const { return num_servers_; }

  // Drives the protocol to completion and returns the ledger. Throws
  // RoundBoundError if the coordinator never halts within its bound.
  CommLedger run(Protocol& protocol);

 private:
  friend class CoordinatorContext;
  friend class ServerContext;

  void check_not_running(const char* what) const;
  void check_server_id(int server_id) const;
  std::any& audited_state(int server_id);

  int num_servers_;
  std::uint64_t master_seed_;
  Options options_;
  bool running_ = false;
  std::vector<std::shared_ptr<std::any>> states_;
  std::vector<Message> to_servers_;
  std::vector<bool> sent_;
  std::vector<Message> replies_;
  std::vector<bool> replied_;
  CommLedger ledger_;
};

template <typename T>
T& ServerContext::state() {
  std::any& slot = fabric_.audited_state(id_);
  if (!slot.has_value()) throw ProtocolError("ServerContext::state: no state installed");
  T* p = std::any_cast<T>(&slot);
  if (p == nullptr) throw ProtocolError("ServerContext::state: type mismatch");
  return *p;
}

}  // namespace distsketch
