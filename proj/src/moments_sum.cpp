/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <cmath>
#include <map>
#include <stdexcept>

#include "distsketch/moments.hpp"

namespace distsketch {

namespace {

struct DomainSlot {
  std::shared_ptr<SampleableDomain> domain;
};

// Rounds: 1 masses up; 2 per-server draw counts down, sample multisets up as
// (key, count); 3 deduplicated key set down, weights up; then halt.
class SumProtocol : public Protocol {
 public:
  SumProtocol(const FunctionSpec& f, int arity, std::int64_t samples)
      : f_(f), arity_(arity), samples_(samples) {}

  int max_rounds() const override { return 4; }

  void coordinator_step(CoordinatorContext& ctx) override {
    switch (ctx.round()) {
      case 1:
        ctx.broadcast(Message{});
        break;
      case 2: {
        const int s = ctx.server_count();
        masses_.resize(static_cast<std::size_t>(s));
        total_mass_ = 0.0;
        for (int t = 1; t <= s; ++t) {
          masses_[static_cast<std::size_t>(t) - 1] = ctx.reply_from(t).get_value();
          if (masses_[static_cast<std::size_t>(t) - 1] < 0.0)
            throw EstimatorError("distributed_sum: negative local mass");
          total_mass_ += masses_[static_cast<std::size_t>(t) - 1];
        }
        if (total_mass_ <= 0.0) {
          estimate = 0.0;
          ctx.halt();
          return;
        }
        const auto cdf = prefix_sums(masses_);
        std::vector<std::int64_t> counts(static_cast<std::size_t>(s), 0);
        for (std::int64_t i = 0; i < samples_; ++i)
          ++counts[sample_cdf(cdf, ctx.rng())];
        for (int t = 1; t <= s; ++t) {
          Message m;
          m.put_index(counts[static_cast<std::size_t>(t) - 1]);
          ctx.send(t, m);
        }
        break;
      }
      case 3: {
        for (int t = 1; t <= ctx.server_count(); ++t) {
          Message& r = ctx.reply_from(t);
          while (r.remaining_indices() >= static_cast<std::size_t>(arity_) + 1) {
            DomainKey key(static_cast<std::size_t>(arity_));
            for (auto& q : key) q = r.get_index();
            sample_counts_[key] += r.get_index();
          }
        }
        Message m;
        for (const auto& [key, cnt] : sample_counts_) {
          (void)cnt;
          for (auto q : key) m.put_index(q);
        }
        ctx.broadcast(m);
        break;
      }
      default: {
        const int s = ctx.server_count();
        double acc = 0.0;
        std::vector<std::vector<double>> weights(static_cast<std::size_t>(s));
        for (int t = 1; t <= s; ++t) {
          Message& r = ctx.reply_from(t);
          auto& w = weights[static_cast<std::size_t>(t) - 1];
          w.reserve(sample_counts_.size());
          while (r.remaining_values() > 0) w.push_back(r.get_value());
          if (w.size() != sample_counts_.size())
            throw ProtocolError("distributed_sum: weight reply size mismatch");
        }
        std::size_t pos = 0;
        for (const auto& [key, cnt] : sample_counts_) {
          double sum = 0.0, fsum = 0.0;
          for (int t = 0; t < s; ++t) {
            const double v = weights[static_cast<std::size_t>(t)][pos];
            sum += v;
            fsum += f_(v);
          }
          if (fsum <= 0.0) throw EstimatorError("distributed_sum: sampled key has zero mass");
          acc += static_cast<double>(cnt) * f_(sum) / fsum;
          ++pos;
        }
        estimate = total_mass_ / static_cast<double>(samples_) * acc;
        ctx.halt();
      }
    }
  }

  void server_step(ServerContext& ctx) override {
    auto& slot = ctx.state<DomainSlot>();
    switch (ctx.round()) {
      case 1: {
        Message m;
        m.put_value(slot.domain->mass_f());
        ctx.reply(std::move(m));
        break;
      }
      case 2: {
        const std::int64_t count = ctx.inbox().get_index();
        std::vector<std::pair<DomainKey, std::int64_t>> local;
        if (count > 0) local = slot.domain->draw_counts(ctx.rng(), count);
        Message m;
        for (const auto& [key, cnt] : local) {
          for (auto q : key) m.put_index(q);
          m.put_index(cnt);
        }
        ctx.reply(std::move(m));
        break;
      }
      default: {
        Message& in = ctx.inbox();
        Message m;
        while (in.remaining_indices() >= static_cast<std::size_t>(slot.domain->key_arity())) {
          DomainKey key(static_cast<std::size_t>(slot.domain->key_arity()));
          for (auto& q : key) q = in.get_index();
          m.put_value(slot.domain->weight(key));
        }
        ctx.reply(std::move(m));
      }
    }
  }

  double estimate = 0.0;

 private:
  const FunctionSpec& f_;
  int arity_;
  std::int64_t samples_;
  std::vector<double> masses_;
  double total_mass_ = 0.0;
  std::map<DomainKey, std::int64_t> sample_counts_;
};

std::int64_t sum_sample_count(const SumConfig& config, int s, double c_fs, double eps) {
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("distributed_sum: eps must be in (0, 1]");
  const double l = std::ceil(config.sample_factor * s * c_fs / (eps * eps));
  if (!(l >= 1.0) || l > 1e12) throw std::invalid_argument("distributed_sum: absurd sample count");
  return static_cast<std::int64_t>(l);
}

}  // namespace

void PartitionedVectors::validate() const {
  if (vectors.empty()) throw std::invalid_argument("PartitionedVectors: no servers");
  const Index len = vectors.front().size();
  if (len < 1) throw std::invalid_argument("PartitionedVectors: empty vectors");
  for (const auto& v : vectors) {
    if (v.size() != len) throw std::invalid_argument("PartitionedVectors: length mismatch");
    for (Index i = 0; i < v.size(); ++i)
      if (!(v(i) >= 0.0) || !std::isfinite(v(i)))
        throw std::invalid_argument("PartitionedVectors: entries must be nonnegative and finite");
  }
}

double local_moment(const Vector& a, const FunctionSpec& f) {
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (!(a(i) >= 0.0) || !std::isfinite(a(i)))
      throw std::invalid_argument("local_moment: entries must be nonnegative and finite");
    const double fv = f(a(i));
    if (fv < 0.0) throw FunctionSpecError("local_moment: f produced a negative value");
    acc += fv;
  }
  return acc;
}

void TupleData::validate(int k) const {
  if (per_server.empty()) throw std::invalid_argument("TupleData: no servers");
  const Index cols = per_server.front().cols();
  if (cols < k) throw std::invalid_argument("TupleData: fewer columns than tuple arity");
  for (const auto& m : per_server) {
    if (m.cols() != cols) throw std::invalid_argument("TupleData: column count mismatch");
    if (m.rows() < 1) throw std::invalid_argument("TupleData: server with no vectors");
    if (!m.allFinite()) throw std::invalid_argument("TupleData: non-finite entries");
  }
}

SumResult distributed_sum(std::vector<std::shared_ptr<SampleableDomain>> domains,
                          const FunctionSpec& f, double eps, std::uint64_t master_seed,
                          const SumConfig& config) {
  if (domains.empty()) throw std::invalid_argument("distributed_sum: no domains");
  const int s = static_cast<int>(domains.size());
  const int arity = domains.front()->key_arity();
  for (const auto& d : domains)
    if (!d || d->key_arity() != arity)
      throw std::invalid_argument("distributed_sum: inconsistent domains");
  if (!(f.c_fs >= 1.0)) throw FunctionSpecError("distributed_sum: c_fs must be >= 1");
  {
    Rng audit(derive_key(master_seed, 0xc0ffee));
    spot_check_c_fs(f, s, audit, config.spot_check_trials);
  }
  SumResult result;
  result.samples = sum_sample_count(config, s, f.c_fs, eps);
  Fabric fabric(s, master_seed, {.parallel = config.parallel});
  for (int t = 1; t <= s; ++t)
    fabric.install_state<DomainSlot>(t, DomainSlot{domains[static_cast<std::size_t>(t) - 1]});
  SumProtocol proto(f, arity, result.samples);
  result.ledger = fabric.run(proto);
  result.estimate = proto.estimate;
  return result;
}

SumResult distributed_sum(const PartitionedVectors& input, const FunctionSpec& f, double eps,
                          std::uint64_t master_seed, const SumConfig& config) {
  input.validate();
  std::vector<std::shared_ptr<SampleableDomain>> domains;
  domains.reserve(input.vectors.size());
  for (const auto& v : input.vectors) domains.push_back(std::make_shared<VectorDomain>(v, f));
  return distributed_sum(std::move(domains), f, eps, master_seed, config);
}

SumResult generalized_moment(const TupleData& input, const FunctionSpec& f, const GFunc& g,
                             int k, double eps, std::uint64_t master_seed,
                             const SumConfig& config) {
  input.validate(k);
  std::vector<std::shared_ptr<SampleableDomain>> domains;
  domains.reserve(input.per_server.size());
  for (const auto& m : input.per_server)
    domains.push_back(std::make_shared<TupleDomain>(m, f, g, k));
  return distributed_sum(std::move(domains), f, eps, master_seed, config);
}

double exact_moment(const PartitionedVectors& input, const FunctionSpec& f) {
  input.validate();
  double acc = 0.0;
  for (Index i = 0; i < input.n(); ++i) {
    double sum = 0.0;
    for (const auto& v : input.vectors) sum += v(i);
    acc += f(sum);
  }
  return acc;
}

double exact_frequency_moment(const PartitionedVectors& input, int k) {
  return exact_moment(input, power_moment(k, input.servers()));
}

double exact_generalized_moment(const TupleData& input, const FunctionSpec& f, const GFunc& g,
                                int k) {
  input.validate(k);
  std::vector<TupleDomain> domains;
  domains.reserve(input.per_server.size());
  for (const auto& m : input.per_server) domains.emplace_back(m, f, g, k);
  // Enumerate the shared tuple set once through the first domain's order.
  double acc = 0.0;
  const Index n = input.n();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(k));
  const auto rec = [&](auto&& self, int pos) -> void {
    if (pos == k) {
      double sum = 0.0;
      DomainKey key(idx.begin(), idx.end());
      for (const auto& d : domains) sum += d.weight(key);
      acc += f(sum);
      return;
    }
    for (std::int64_t j = 0; j < n; ++j) {
      bool dup = false;
      for (int q = 0; q < pos; ++q)
        if (idx[static_cast<std::size_t>(q)] == j) dup = true;
      if (dup) continue;
      idx[static_cast<std::size_t>(pos)] = j;
      self(self, pos + 1);
    }
  };
  rec(rec, 0);
  return acc;
}

std::vector<std::pair<int, std::int64_t>> two_level_draws(const PartitionedVectors& input,
                                                          const FunctionSpec& f,
                                                          std::int64_t count,
                                                          std::uint64_t seed) {
  input.validate();
  std::vector<double> masses;
  std::vector<std::vector<double>> cdfs;
  for (const auto& v : input.vectors) {
    std::vector<double> fw(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) fw[static_cast<std::size_t>(i)] = f(v(i));
    cdfs.push_back(prefix_sums(fw));
    masses.push_back(cdfs.back().back());
  }
  const auto outer = prefix_sums(masses);
  if (outer.back() <= 0.0) throw std::invalid_argument("two_level_draws: zero total mass");
  Rng rng(seed);
  std::vector<std::pair<int, std::int64_t>> draws;
  draws.reserve(static_cast<std::size_t>(count));
  for (std::int64_t c = 0; c < count; ++c) {
    const int t = static_cast<int>(sample_cdf(outer, rng)) + 1;
    const auto i = static_cast<std::int64_t>(sample_cdf(cdfs[static_cast<std::size_t>(t) - 1], rng));
    draws.emplace_back(t, i);
  }
  return draws;
}

}  // namespace distsketch
