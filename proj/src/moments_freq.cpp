/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "distsketch/moments.hpp"

namespace distsketch {

namespace {

struct FreqSlot {
  Vector a;
  FunctionSpec f;
  std::vector<double> fcdf;  // inclusive prefix sums of f(a_i)
  double mass = 0.0;
};

std::int64_t checked_count(double x, const char* what, double limit) {
  const double c = std::ceil(x);
  if (!(c >= 1.0) || c > limit) throw std::invalid_argument(std::string(what) + ": size out of range");
  return static_cast<std::int64_t>(c);
}

// Two-phase stratified estimator for sum_i f(sum_t a_ti) where the strata
// are exact density ratios rho_i = f(sum_t a_ti) / sum_t f(a_ti) in
// [1, s^(kappa-1)].
//
// Round sketch. 1: masses up. 2: phase-1 draw counts down, (index, count)
// multisets up. 3: distinct phase-1 indices down, values up; coarse exit
// when the ratio average is already large. 4: phase-2 draw counts down,
// (index, count, value) up -- the value pins the picking server's B-tilde.
// 5: median-probe value queries down (deduplicated against everything the
// coordinator has seen), values up. 6: exact-query lists for filter
// survivors down, values up. 7: bucket counting, halt.
class FreqProtocol : public Protocol {
 public:
  FreqProtocol(int s, Index n, double kappa, FunctionSpec f, double eps, FreqConfig cfg)
      : s_(s), n_(n), kappa_(kappa), eps_(eps), cfg_(cfg), f_(std::move(f)) {
    top_ = std::pow(static_cast<double>(s_), kappa_ - 1.0);
    lns_ = std::max(std::log(static_cast<double>(s_)), 1.0);
    val_.assign(static_cast<std::size_t>(s_) * static_cast<std::size_t>(n_), 0.0);
    known_.assign(val_.size(), 0);
    rho_.assign(static_cast<std::size_t>(n_), 0.0);
    rho_known_.assign(static_cast<std::size_t>(n_), 0);
  }

  int max_rounds() const override { return 8; }

  double estimate = 0.0;
  std::string phase;

  void coordinator_step(CoordinatorContext& ctx) override {
    switch (ctx.round()) {
      case 1:
        ctx.broadcast(Message{});
        break;
      case 2:
        step_masses(ctx);
        break;
      case 3:
        step_phase1_query(ctx);
        break;
      case 4:
        step_phase1_decide(ctx);
        break;
      case 5:
        step_phase2_slots(ctx);
        break;
      case 6:
        step_medians(ctx);
        break;
      default:
        step_count(ctx);
        break;
    }
  }

  void server_step(ServerContext& ctx) override {
    auto& slot = ctx.state<FreqSlot>();
    switch (ctx.round()) {
      case 1: {
        if (slot.fcdf.empty()) {
          std::vector<double> fw(static_cast<std::size_t>(slot.a.size()));
          for (Index i = 0; i < slot.a.size(); ++i) fw[static_cast<std::size_t>(i)] = slot.f(slot.a(i));
          slot.fcdf = prefix_sums(fw);
          slot.mass = slot.fcdf.back();
        }
        Message m;
        m.put_value(slot.mass);
        ctx.reply(std::move(m));
        break;
      }
      case 2:
      case 4: {
        const std::int64_t count = ctx.inbox().get_index();
        std::map<std::int64_t, std::int64_t> picks;
        for (std::int64_t c = 0; c < count; ++c)
          ++picks[static_cast<std::int64_t>(sample_cdf(slot.fcdf, ctx.rng()))];
        Message m;
        for (const auto& [i, cnt] : picks) {
          m.put_index(i);
          m.put_index(cnt);
          if (ctx.round() == 4) m.put_value(slot.a(i));
        }
        ctx.reply(std::move(m));
        break;
      }
      default: {
        Message& in = ctx.inbox();
        Message m;
        while (in.remaining_indices() > 0) m.put_value(slot.a(in.get_index()));
        ctx.reply(std::move(m));
      }
    }
  }

 private:
  struct DrawSlot {
    std::int64_t i;
    int t;
    double btilde;
  };

  double& val(int t, std::int64_t i) {
    return val_[static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(n_) +
                static_cast<std::size_t>(i)];
  }
  bool known(int t, std::int64_t i) const {
    return known_[static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(n_) +
                  static_cast<std::size_t>(i)] != 0;
  }
  void mark(int t, std::int64_t i) {
    known_[static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(i)] = 1;
  }

  // Exact ratio once all s values of index i are cached.
  void settle_rho(std::int64_t i) {
    if (rho_known_[static_cast<std::size_t>(i)]) return;
    double sum = 0.0, fsum = 0.0;
    for (int t = 1; t <= s_; ++t) {
      if (!known(t, i)) throw ProtocolError("internal: exact ratio requested before values");
      sum += val(t, i);
      fsum += f_(val(t, i));
    }
    if (fsum <= 0.0) throw EstimatorError("frequency engine: sampled index with zero mass");
    double rho = f_(sum) / fsum;
    if (rho < 1.0 - 1e-6 || rho > top_ * (1.0 + 1e-6))
      throw EstimatorError("frequency engine: density ratio left [1, s^(kappa-1)]");
    rho = std::clamp(rho, 1.0, top_);
    rho_[static_cast<std::size_t>(i)] = rho;
    rho_known_[static_cast<std::size_t>(i)] = 1;
  }

  std::int64_t bucket_of(double rho) const {
    const double x = std::log(top_ / std::clamp(rho, 1.0, top_)) / eps_;
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(x)), 0,
                                    static_cast<std::int64_t>(betas_.size()) - 1);
  }

  void send_counts(CoordinatorContext& ctx, std::int64_t total) {
    const auto cdf = prefix_sums(ct_);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(s_), 0);
    for (std::int64_t i = 0; i < total; ++i) ++counts[sample_cdf(cdf, ctx.rng())];
    for (int t = 1; t <= s_; ++t) {
      Message m;
      m.put_index(counts[static_cast<std::size_t>(t) - 1]);
      ctx.send(t, m);
    }
  }

  void step_masses(CoordinatorContext& ctx) {
    ct_.resize(static_cast<std::size_t>(s_));
    b_total_ = 0.0;
    for (int t = 1; t <= s_; ++t) {
      ct_[static_cast<std::size_t>(t) - 1] = ctx.reply_from(t).get_value();
      if (ct_[static_cast<std::size_t>(t) - 1] < 0.0)
        throw EstimatorError("frequency engine: negative local mass");
      b_total_ += ct_[static_cast<std::size_t>(t) - 1];
    }
    if (b_total_ <= 0.0) {
      estimate = 0.0;
      phase = "coarse";
      ctx.halt();
      return;
    }
    const double eps3 = eps_ * eps_ * eps_;
    phase1_m_ = checked_count(cfg_.phase1_factor * std::pow(static_cast<double>(s_), kappa_ - 2.0) / eps3,
                              "frequency engine phase 1", 1e9);
    send_counts(ctx, phase1_m_);
  }

  void step_phase1_query(CoordinatorContext& ctx) {
    for (int t = 1; t <= s_; ++t) {
      Message& r = ctx.reply_from(t);
      while (r.remaining_indices() >= 2) {
        const std::int64_t i = r.get_index();
        p1_counts_[i] += r.get_index();
      }
    }
    Message m;
    p1_query_.clear();
    for (const auto& [i, cnt] : p1_counts_) {
      (void)cnt;
      p1_query_.push_back(i);
      m.put_index(i);
    }
    ctx.broadcast(m);
  }

  void step_phase1_decide(CoordinatorContext& ctx) {
    for (int t = 1; t <= s_; ++t) {
      Message& r = ctx.reply_from(t);
      for (const auto i : p1_query_) {
        val(t, i) = r.get_value();
        mark(t, i);
      }
    }
    double ratio_sum = 0.0;
    for (const auto i : p1_query_) settle_rho(i);
    for (const auto& [i, cnt] : p1_counts_)
      ratio_sum += static_cast<double>(cnt) * rho_[static_cast<std::size_t>(i)];
    const double atilde = b_total_ * ratio_sum / static_cast<double>(phase1_m_);
    if (atilde >= static_cast<double>(s_) * b_total_) {
      estimate = atilde;
      phase = "coarse";
      ctx.halt();
      return;
    }
    const double eps3 = eps_ * eps_ * eps_;
    sample_size_ = checked_count(
        cfg_.sample_factor * std::pow(static_cast<double>(s_), kappa_ - 1.0) * lns_ * lns_ / eps3,
        "frequency engine phase 2", 5e7);
    send_counts(ctx, sample_size_);
  }

  void step_phase2_slots(CoordinatorContext& ctx) {
    slots_.reserve(static_cast<std::size_t>(sample_size_));
    for (int t = 1; t <= s_; ++t) {
      Message& r = ctx.reply_from(t);
      while (r.remaining_indices() >= 2) {
        const std::int64_t i = r.get_index();
        const std::int64_t cnt = r.get_index();
        const double v = r.get_value();
        val(t, i) = v;
        mark(t, i);
        const double bt = f_(v);
        if (bt <= 0.0) throw EstimatorError("frequency engine: picked index with zero f-value");
        for (std::int64_t c = 0; c < cnt; ++c) slots_.push_back({i, t, bt});
      }
    }
    if (static_cast<std::int64_t>(slots_.size()) != sample_size_)
      throw ProtocolError("frequency engine: sample count mismatch");

    const double eps3 = eps_ * eps_ * eps_;
    const auto grid_len = static_cast<std::int64_t>(std::floor(std::log(top_) / eps_)) + 1;
    betas_.clear();
    for (std::int64_t j = 0; j < grid_len; ++j)
      betas_.push_back(top_ * std::exp(-eps_ * static_cast<double>(j)));
    reps_ = checked_count(cfg_.rep_factor * (kappa_ * lns_ + std::log(1.0 / eps_)) + 1e-12,
                          "frequency engine repetitions", 1e6);

    // Per-stratum uniform subsets of the draw slots, selected now; the
    // median-probe server draws replay from a stored key so round 6 can
    // reproduce them without storing every draw.
    replay_key_ = ctx.rng().next_u64();
    tsel_.assign(betas_.size(), {});
    std::vector<std::int64_t> scratch(slots_.size());
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      const std::int64_t want = std::min<std::int64_t>(
          sample_size_,
          checked_count(cfg_.bucket_factor * betas_[j] * lns_ * lns_ / eps3, "stratum subset", 5e7));
      for (std::size_t q = 0; q < scratch.size(); ++q) scratch[q] = static_cast<std::int64_t>(q);
      for (std::int64_t q = 0; q < want; ++q) {
        const auto swap_at =
            static_cast<std::size_t>(q) +
            static_cast<std::size_t>(ctx.rng().below(static_cast<std::uint64_t>(
                static_cast<std::int64_t>(scratch.size()) - q)));
        std::swap(scratch[static_cast<std::size_t>(q)], scratch[swap_at]);
      }
      tsel_[j].assign(scratch.begin(), scratch.begin() + want);
    }

    // Collect the value queries the median probes will need.
    std::vector<std::vector<char>> need(static_cast<std::size_t>(s_),
                                        std::vector<char>(static_cast<std::size_t>(n_), 0));
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      const auto l = static_cast<std::int64_t>(std::ceil(top_ / betas_[j]));
      for (const auto pos : tsel_[j]) {
        const std::int64_t i = slots_[static_cast<std::size_t>(pos)].i;
        Rng sub(derive_key(replay_key_, j, static_cast<std::uint64_t>(pos)));
        for (std::int64_t q = 0; q < reps_ * l; ++q) {
          const int t = static_cast<int>(sub.below(static_cast<std::uint64_t>(s_))) + 1;
          if (!known(t, i)) need[static_cast<std::size_t>(t) - 1][static_cast<std::size_t>(i)] = 1;
        }
      }
    }
    medq_.assign(static_cast<std::size_t>(s_), {});
    for (int t = 1; t <= s_; ++t) {
      Message m;
      for (std::int64_t i = 0; i < n_; ++i)
        if (need[static_cast<std::size_t>(t) - 1][static_cast<std::size_t>(i)]) {
          medq_[static_cast<std::size_t>(t) - 1].push_back(i);
          m.put_index(i);
        }
      ctx.send(t, m);
    }
  }

  void step_medians(CoordinatorContext& ctx) {
    for (int t = 1; t <= s_; ++t) {
      Message& r = ctx.reply_from(t);
      for (const auto i : medq_[static_cast<std::size_t>(t) - 1]) {
        val(t, i) = r.get_value();
        mark(t, i);
      }
    }
    // Replay the probe draws, form the median estimate per (stratum, slot),
    // and mark filter survivors for exact queries.
    std::vector<double> meds(static_cast<std::size_t>(reps_));
    std::vector<std::vector<char>> need(static_cast<std::size_t>(s_),
                                        std::vector<char>(static_cast<std::size_t>(n_), 0));
    std::vector<char> want_exact(static_cast<std::size_t>(n_), 0);
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      const double beta = betas_[j];
      const auto l = static_cast<std::int64_t>(std::ceil(top_ / beta));
      const double lo = beta * std::exp(-eps_ * (1.0 + 2.0 / kappa_));
      const double hi = cfg_.filter_upper * static_cast<double>(s_) * lns_ * beta;
      for (const auto pos : tsel_[j]) {
        const auto& slot = slots_[static_cast<std::size_t>(pos)];
        Rng sub(derive_key(replay_key_, j, static_cast<std::uint64_t>(pos)));
        for (std::int64_t rep = 0; rep < reps_; ++rep) {
          double sum = 0.0;
          for (std::int64_t q = 0; q < l; ++q) {
            const int t = static_cast<int>(sub.below(static_cast<std::uint64_t>(s_))) + 1;
            sum += val(t, slot.i);
          }
          meds[static_cast<std::size_t>(rep)] =
              f_(static_cast<double>(s_) / static_cast<double>(l) * sum);
        }
        auto mid = meds.begin() + static_cast<std::ptrdiff_t>((meds.size() - 1) / 2);
        std::nth_element(meds.begin(), mid, meds.end());
        const double ratio_probe = *mid / slot.btilde;
        if (ratio_probe >= lo && ratio_probe <= hi) want_exact[static_cast<std::size_t>(slot.i)] = 1;
      }
    }
    for (std::int64_t i = 0; i < n_; ++i) {
      if (!want_exact[static_cast<std::size_t>(i)] || rho_known_[static_cast<std::size_t>(i)])
        continue;
      bool all = true;
      for (int t = 1; t <= s_; ++t)
        if (!known(t, i)) {
          need[static_cast<std::size_t>(t) - 1][static_cast<std::size_t>(i)] = 1;
          all = false;
        }
      if (all) settle_rho(i);  // already cached end to end, no traffic needed
    }
    exactq_.assign(static_cast<std::size_t>(s_), {});
    for (int t = 1; t <= s_; ++t) {
      Message m;
      for (std::int64_t i = 0; i < n_; ++i)
        if (need[static_cast<std::size_t>(t) - 1][static_cast<std::size_t>(i)]) {
          exactq_[static_cast<std::size_t>(t) - 1].push_back(i);
          m.put_index(i);
        }
      ctx.send(t, m);
    }
  }

  void step_count(CoordinatorContext& ctx) {
    for (int t = 1; t <= s_; ++t) {
      Message& r = ctx.reply_from(t);
      for (const auto i : exactq_[static_cast<std::size_t>(t) - 1]) {
        val(t, i) = r.get_value();
        mark(t, i);
      }
    }
    for (int t = 1; t <= s_; ++t)
      for (const auto i : exactq_[static_cast<std::size_t>(t) - 1])
        if (!rho_known_[static_cast<std::size_t>(i)]) {
          bool all = true;
          for (int u = 1; u <= s_; ++u)
            if (!known(u, i)) all = false;
          if (all) settle_rho(i);
        }
    double acc = 0.0;
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      if (tsel_[j].empty()) continue;
      std::int64_t cnt = 0;
      for (const auto pos : tsel_[j]) {
        const std::int64_t i = slots_[static_cast<std::size_t>(pos)].i;
        if (rho_known_[static_cast<std::size_t>(i)] &&
            bucket_of(rho_[static_cast<std::size_t>(i)]) == static_cast<std::int64_t>(j))
          ++cnt;
      }
      const double shat = static_cast<double>(cnt) * static_cast<double>(sample_size_) /
                          static_cast<double>(tsel_[j].size());
      acc += shat * betas_[j] * std::exp(-eps_ / 2.0);
    }
    estimate = b_total_ / static_cast<double>(sample_size_) * acc;
    phase = "full";
    ctx.halt();
  }

  int s_;
  Index n_;
  double kappa_, eps_;
  FreqConfig cfg_;
  FunctionSpec f_;
  double top_ = 1.0, lns_ = 1.0, b_total_ = 0.0;
  std::vector<double> ct_;
  std::int64_t phase1_m_ = 0, sample_size_ = 0, reps_ = 0;
  std::map<std::int64_t, std::int64_t> p1_counts_;
  std::vector<std::int64_t> p1_query_;
  std::vector<double> val_;
  std::vector<std::uint8_t> known_;
  std::vector<double> rho_;
  std::vector<std::uint8_t> rho_known_;
  std::vector<DrawSlot> slots_;
  std::vector<double> betas_;
  std::vector<std::vector<std::int64_t>> tsel_;
  std::uint64_t replay_key_ = 0;
  std::vector<std::vector<std::int64_t>> medq_, exactq_;
};

FreqResult run_engine(const PartitionedVectors& input, double kappa, FunctionSpec f, double eps,
                      std::uint64_t master_seed, const FreqConfig& config) {
  input.validate();
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("frequency engine: eps must be in (0, 1]");
  const int s = input.servers();
  if (static_cast<double>(s) * static_cast<double>(input.n()) > 1e8)
    throw std::invalid_argument("frequency engine: instance too large for the dense cache");
  Fabric fabric(s, master_seed, {.parallel = config.parallel});
  for (int t = 1; t <= s; ++t)
    fabric.install_state<FreqSlot>(t, FreqSlot{input.vectors[static_cast<std::size_t>(t) - 1], f,
                                               {}, 0.0});
  FreqProtocol proto(s, input.n(), kappa, std::move(f), eps, config);
  FreqResult result;
  result.ledger = fabric.run(proto);
  result.estimate = proto.estimate;
  result.phase = proto.phase;
  return result;
}

}  // namespace

FreqResult frequency_moments(const PartitionedVectors& input, int k, double eps,
                             std::uint64_t master_seed, const FreqConfig& config) {
  if (k < 2) throw std::invalid_argument("frequency_moments: k must be >= 2");
  return run_engine(input, static_cast<double>(k), power_moment(k, input.servers()), eps,
                    master_seed, config);
}

FreqResult lipschitz_moments(const PartitionedVectors& input, const FunctionSpec& f, double eps,
                             std::uint64_t master_seed, const FreqConfig& config) {
  if (!f.lipschitz_order || *f.lipschitz_order < 4.0)
    throw std::invalid_argument("lipschitz_moments: f needs a Lipschitz order >= 4");
  {
    Rng audit(derive_key(master_seed, 0xfeed));
    spot_check_superadditive(f, input.servers(), audit);
    spot_check_lipschitz_order(f, audit);
  }
  return run_engine(input, *f.lipschitz_order, f, eps, master_seed, config);
}

}  // namespace distsketch
