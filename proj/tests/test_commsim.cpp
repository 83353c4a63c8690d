/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <atomic>
#include <barrier>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "distsketch/commsim.hpp"

#include "doctest.h"

using namespace distsketch;

namespace {

// Minimal protocol scaffolding: forward the steps to lambdas.
struct LambdaProtocol : Protocol {
  int bound;
  std::function<void(CoordinatorContext&)> coord;
  std::function<void(ServerContext&)> serve;
  LambdaProtocol(int b, std::function<void(CoordinatorContext&)> c,
                 std::function<void(ServerContext&)> s)
      : bound(b), coord(std::move(c)), serve(std::move(s)) {}
  int max_rounds() const override { return bound; }
  void coordinator_step(CoordinatorContext& ctx) override { coord(ctx); }
  void server_step(ServerContext& ctx) override { serve(ctx); }
};

}  // namespace

TEST_CASE("a coordinator that halts immediately exchanges nothing") {
  Fabric fabric(3, 1);
  LambdaProtocol p{ 1, [](CoordinatorContext& ctx) { ctx.halt(); },
                   [](ServerContext&) { FAIL("server stepped after halt"); }};
  const CommLedger ledger = fabric.run(p);
  CHECK(ledger.rounds() == 0);
  CHECK(ledger.total_words() == 0);
  CHECK(ledger.entries().empty());
}

TEST_CASE("word accounting: values, indices, seeds and matrices") {
  Message m;
  CHECK(m.word_count() == 0);
  CHECK(m.empty());
  m.put_value(1.5);
  m.put_index(7);
  CHECK(m.word_count() == 2);
  m.put_seed(SketchSeed::make(4, 9, 6, 1));
  CHECK(m.word_count() == 2 + 6 + 4);
  Matrix a(3, 4);
  a.setOnes();
  m.put_matrix(a);
  CHECK(m.word_count() == 2 + (6 + 4) + (12 + 2));

  CHECK(m.get_value() == 1.5);
  CHECK(m.get_index() == 7);
  CHECK(m.get_seed() == SketchSeed::make(4, 9, 6, 1));
  const Matrix back = m.get_matrix();
  CHECK(back == a);
  CHECK_THROWS_AS(m.get_value(), ProtocolError);
  CHECK_THROWS_AS(m.get_seed(), ProtocolError);
  CHECK_THROWS_AS(m.get_matrix(), ProtocolError);
}

TEST_CASE("one round of scalar traffic lands in the ledger per edge") {
  Fabric fabric(2, 3);
  LambdaProtocol p{
                   2,
                   [](CoordinatorContext& ctx) {
                     if (ctx.round() == 1) {
                       Message m;
                       m.put_value(1.0);
                       m.put_value(2.0);
                       m.put_value(3.0);
                       ctx.broadcast(m);
                     } else {
                       for (int t = 1; t <= ctx.server_count(); ++t)
                         CHECK(ctx.reply_from(t).get_value() ==
                               doctest::Approx(6.0 * static_cast<double>(t)));
                       ctx.halt();
                     }
                   },
                   [](ServerContext& ctx) {
                     double sum = 0.0;
                     for (int i = 0; i < 3; ++i) sum += ctx.inbox().get_value();
                     Message m;
                     m.put_value(sum * static_cast<double>(ctx.server_id()));
                     ctx.reply(std::move(m));
                   }};
  const CommLedger ledger = fabric.run(p);
  CHECK(ledger.rounds() == 1);
  CHECK(ledger.total_words() == 3 + 3 + 1 + 1);
  const LedgerSummary s = ledger.summary();
  CHECK(s.words_by_round == std::vector<std::uint64_t>{8});
  CHECK(s.words_by_server.at(1) == 4);
  CHECK(s.words_by_server.at(2) == 4);

  const auto js = ledger.summary_json();
  CHECK(js["rounds"] == 1);
  CHECK(js["total_words"] == 8);
  CHECK(js["words_by_server"]["1"] == 4);

  // bit model: every word carries b payload bits plus an index tag
  CHECK(ledger.bit_estimate(32, 1024) == 8 * (32 + 10));
}

TEST_CASE("empty messages are delivered without occupying the ledger") {
  Fabric fabric(2, 4);
  int deliveries = 0;
  LambdaProtocol p{
                   2,
                   [](CoordinatorContext& ctx) {
                     if (ctx.round() == 1)
                       ctx.broadcast(Message{});
                     else
                       ctx.halt();
                   },
                   [&](ServerContext& ctx) {
                     CHECK(ctx.inbox().empty());
                     ++deliveries;
                     ctx.reply(Message{});
                   }};
  const CommLedger ledger = fabric.run(p);
  CHECK(deliveries == 2);
  CHECK(ledger.rounds() == 1);
  CHECK(ledger.total_words() == 0);
  CHECK(ledger.entries().empty());
}

TEST_CASE("overrunning the declared round bound raises RoundBoundError") {
  Fabric fabric(1, 5);
  LambdaProtocol p{ 3, [](CoordinatorContext& ctx) { ctx.broadcast(Message{}); },
                   [](ServerContext& ctx) { ctx.reply(Message{}); }};
  CHECK_THROWS_AS(fabric.run(p), RoundBoundError);
}

TEST_CASE("halting and sending in the same step is a protocol violation") {
  Fabric fabric(1, 6);
  LambdaProtocol p{ 2,
                   [](CoordinatorContext& ctx) {
                     Message m;
                     m.put_value(1.0);
                     ctx.send(1, std::move(m));
                     ctx.halt();
                   },
                   [](ServerContext& ctx) { ctx.reply(Message{}); }};
  CHECK_THROWS_AS(fabric.run(p), ProtocolError);
}

TEST_CASE("duplicate sends and duplicate replies are rejected") {
  Fabric fabric(1, 7);
  LambdaProtocol p{ 2,
                   [](CoordinatorContext& ctx) {
                     Message a;
                     a.put_value(1.0);
                     ctx.send(1, std::move(a));
                     Message b;
                     b.put_value(2.0);
                     ctx.send(1, std::move(b));
                   },
                   [](ServerContext& ctx) { ctx.reply(Message{}); }};
  CHECK_THROWS_AS(fabric.run(p), ProtocolError);

  Fabric fabric2(1, 7);
  LambdaProtocol q{ 2, [](CoordinatorContext& ctx) { ctx.broadcast(Message{}); },
                   [](ServerContext& ctx) {
                     ctx.reply(Message{});
                     ctx.reply(Message{});
                   }};
  CHECK_THROWS_AS(fabric2.run(q), ProtocolError);
}

TEST_CASE("server state is fenced: foreign access raises IsolationError") {
  struct Slot {
    int value = 0;
  };
  Fabric fabric(2, 8, {.parallel = true});
  fabric.install_state<Slot>(1, Slot{10});
  fabric.install_state<Slot>(2, Slot{20});
  std::atomic<ServerContext*> shared{nullptr};
  std::barrier<> published(2), done(2);
  LambdaProtocol p{2,
                   [](CoordinatorContext& ctx) {
                     if (ctx.round() == 1)
                       ctx.broadcast(Message{});
                     else
                       ctx.halt();
                   },
                   [&](ServerContext& ctx) {
                     // both steps run concurrently; server 1's context stays
                     // alive until server 2 finished poking at it
                     if (ctx.server_id() == 1) {
                       shared.store(&ctx);
                       published.arrive_and_wait();
                       done.arrive_and_wait();
                     } else {
                       published.arrive_and_wait();
                       ServerContext* foreign = shared.load();
                       CHECK_THROWS_AS(foreign->state<Slot>(), IsolationError);
                       CHECK_THROWS_AS(foreign->inbox(), IsolationError);
                       CHECK_THROWS_AS(foreign->reply(Message{}), IsolationError);
                       done.arrive_and_wait();
                     }
                     CHECK(ctx.state<Slot>().value == 10 * ctx.server_id());
                     // mid-run extraction from inside a step is fenced too
                     CHECK_THROWS_AS(fabric.state_after_run<Slot>(1), ProtocolError);
                     ctx.reply(Message{});
                   }};
  fabric.run(p);
  CHECK(fabric.state_after_run<Slot>(2).value == 20);
}

TEST_CASE("coordinator powers are fenced to the coordinator step") {
  Fabric fabric(1, 9);
  CoordinatorContext* leaked = nullptr;
  LambdaProtocol p{
                   2,
                   [&](CoordinatorContext& ctx) {
                     if (ctx.round() == 1) {
                       leaked = &ctx;
                       ctx.broadcast(Message{});
                     } else {
                       ctx.halt();
                     }
                   },
                   [&](ServerContext& ctx) {
                     CHECK_THROWS_AS(leaked->send(1, Message{}), IsolationError);
                     CHECK_THROWS_AS(leaked->halt(), IsolationError);
                     CHECK_THROWS_AS(leaked->reply_from(1), IsolationError);
                     ctx.reply(Message{});
                   }};
  fabric.run(p);
}

TEST_CASE("typed state access: wrong type or missing state is an error") {
  struct A {
    int x = 0;
  };
  struct B {
    int y = 0;
  };
  Fabric fabric(2, 10);
  fabric.install_state<A>(1, A{5});
  LambdaProtocol p{
                   2,
                   [](CoordinatorContext& ctx) {
                     if (ctx.round() == 1)
                       ctx.broadcast(Message{});
                     else
                       ctx.halt();
                   },
                   [](ServerContext& ctx) {
                     if (ctx.server_id() == 1)
                       CHECK_THROWS_AS(ctx.state<B>(), ProtocolError);
                     else
                       CHECK_THROWS_AS(ctx.state<A>(), ProtocolError);
                     ctx.reply(Message{});
                   }};
  fabric.run(p);
  CHECK(fabric.state_after_run<A>(1).x == 5);
  CHECK_THROWS_AS(fabric.state_after_run<A>(2), ProtocolError);
}

namespace {

// Shared fixture for the scheduling tests: every server mixes its own rng
// stream into per-round replies, coordinator accumulates everything.
struct MixResult {
  std::vector<double> replies;
  CommLedger ledger;
};

MixResult run_mixing(bool parallel, std::uint64_t seed) {
  Fabric fabric(4, seed, {.parallel = parallel});
  MixResult out;
  LambdaProtocol p{
                   4,
                   [&](CoordinatorContext& ctx) {
                     if (ctx.round() == 1) {
                       Message m;
                       m.put_value(0.5);
                       ctx.broadcast(m);
                       return;
                     }
                     if (ctx.round() < 4) {
                       for (int t = 1; t <= ctx.server_count(); ++t) {
                         out.replies.push_back(ctx.reply_from(t).get_value());
                         Message m;
                         m.put_value(out.replies.back());
                         ctx.send(t, std::move(m));
                       }
                       return;
                     }
                     for (int t = 1; t <= ctx.server_count(); ++t)
                       out.replies.push_back(ctx.reply_from(t).get_value());
                     ctx.halt();
                   },
                   [](ServerContext& ctx) {
                     const double in = ctx.inbox().get_value();
                     Message m;
                     m.put_value(in + ctx.rng().next_double() + ctx.server_id());
                     ctx.reply(std::move(m));
                   }};
  out.ledger = fabric.run(p);
  return out;
}

}  // namespace

TEST_CASE("parallel and sequential schedules produce identical transcripts") {
  const MixResult seq = run_mixing(false, 77);
  const MixResult par = run_mixing(true, 77);
  CHECK(seq.replies == par.replies);
  REQUIRE(seq.ledger.entries().size() == par.ledger.entries().size());
  for (std::size_t i = 0; i < seq.ledger.entries().size(); ++i) {
    CHECK(seq.ledger.entries()[i].round == par.ledger.entries()[i].round);
    CHECK(seq.ledger.entries()[i].server_id == par.ledger.entries()[i].server_id);
    CHECK(seq.ledger.entries()[i].words == par.ledger.entries()[i].words);
  }
  CHECK(seq.ledger.rounds() == par.ledger.rounds());

  // and the transcript is a pure function of the master seed
  const MixResult other = run_mixing(false, 78);
  CHECK(seq.replies != other.replies);
  CHECK(run_mixing(false, 77).replies == seq.replies);
}

TEST_CASE("server errors in parallel mode surface as the lowest id's error") {
  Fabric fabric(3, 11, {.parallel = true});
  LambdaProtocol p{ 2, [](CoordinatorContext& ctx) { ctx.broadcast(Message{}); },
                   [](ServerContext& ctx) {
                     if (ctx.server_id() >= 2)
                       throw std::runtime_error("boom from " + std::to_string(ctx.server_id()));
                     ctx.reply(Message{});
                   }};
  try {
    fabric.run(p);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "boom from 2");
  }
}

TEST_CASE("summary totals are conserved across views") {
  const MixResult r = run_mixing(false, 99);
  const LedgerSummary s = r.ledger.summary();
  std::uint64_t by_round = 0, by_server = 0;
  for (const auto w : s.words_by_round) by_round += w;
  for (const auto& [id, w] : s.words_by_server) by_server += w;
  CHECK(by_round == s.total_words);
  CHECK(by_server == s.total_words);
  CHECK(s.total_words == r.ledger.total_words());
  CHECK(static_cast<int>(s.words_by_round.size()) == s.rounds);
}
