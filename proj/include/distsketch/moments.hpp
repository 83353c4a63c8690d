/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "distsketch/commsim.hpp"
#include "distsketch/domains.hpp"
#include "distsketch/function_spec.hpp"

namespace distsketch {

// An estimator's internal consistency check failed (for example an exact
// density ratio left its provable range).
class EstimatorError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// One nonnegative vector per server, shared length.
struct PartitionedVectors {
  std::vector<Vector> vectors;
  int servers() const { return static_cast<int>(vectors.size()); }
  Index n() const { return vectors.empty() ? 0 : vectors.front().size(); }
  void validate() const;
};

// sum_i f(a_i); entries must be nonnegative and finite.
double local_moment(const Vector& a, const FunctionSpec& f);

struct SumConfig {
  double sample_factor = 100.0;  // l = ceil(factor * s * c_fs / eps^2)
  bool parallel = false;
  int spot_check_trials = 64;
};

struct SumResult {
  double estimate = 0.0;
  CommLedger ledger;
  std::int64_t samples = 0;  // l
};

// Importance-sampled additive aggregate: estimates sum_x f(sum_t h_t(x)).
// Unbiased; Var <= c_fs * s * A^2 / samples. Rounds <= 4; sample multisets
// travel as (key, count) pairs and weight queries are deduplicated.
SumResult distributed_sum(const PartitionedVectors& input, const FunctionSpec& f, double eps,
                          std::uint64_t master_seed, const SumConfig& config = {});
SumResult distributed_sum(std::vector<std::shared_ptr<SampleableDomain>> domains,
                          const FunctionSpec& f, double eps, std::uint64_t master_seed,
                          const SumConfig& config = {});

// Server-local banks of vectors; rows of per_server[t] are that server's
// vectors, columns index the shared ground set.
struct TupleData {
  std::vector<Matrix> per_server;
  int servers() const { return static_cast<int>(per_server.size()); }
  Index n() const { return per_server.empty() ? 0 : per_server.front().cols(); }
  void validate(int k) const;
};

// Higher-order correlation M(f, g, k) = sum over ordered distinct k-tuples j
// of f(sum_t a_t(j)), a_t(j) = sum_i g(v_i at j). distributed_sum over the
// implicit tuple domain with streaming rejection sampling server-side.
SumResult generalized_moment(const TupleData& input, const FunctionSpec& f, const GFunc& g,
                             int k, double eps, std::uint64_t master_seed,
                             const SumConfig& config = {});

struct FreqConfig {
  double phase1_factor = 1.0;   // m = ceil(factor * s^(kappa-2) / eps^3)
  double sample_factor = 1.0;   // |S| = ceil(factor * s^(kappa-1) * ln2s / eps^3)
  double bucket_factor = 1.0;   // |T_b| = min(|S|, ceil(factor * b * ln2s / eps^3))
  double rep_factor = 4.0;      // reps = ceil(factor * (kappa ln s + ln(1/eps)))
  double filter_upper = 10.0;   // widened filter top: factor * s * ln s * b
  bool parallel = false;
};

struct FreqResult {
  double estimate = 0.0;
  std::string phase;  // "coarse" (phase-1 exit) or "full"
  CommLedger ledger;
};

// Two-phase estimator for F_k = sum_i (sum_t a_ti)^k, k >= 2. Phase 1
// samples density ratios rho_i = A_i/B_i exactly and exits when the
// coarse estimate is already >= s*B; phase 2 stratifies rho over a geometric
// grid, filters candidates with cheap median estimates and counts strata by
// exact queries. Rounds <= 8.
FreqResult frequency_moments(const PartitionedVectors& input, int k, double eps,
                             std::uint64_t master_seed, const FreqConfig& config = {});

// Same control flow for a superlinear f with known Lipschitz order L >= 4:
// kappa = L, per-index estimates use f, strata live in [1, s^(L-1)].
FreqResult lipschitz_moments(const PartitionedVectors& input, const FunctionSpec& f, double eps,
                             std::uint64_t master_seed, const FreqConfig& config = {});

// Exact oracles (full enumeration; test and report use).
double exact_moment(const PartitionedVectors& input, const FunctionSpec& f);
double exact_frequency_moment(const PartitionedVectors& input, int k);
double exact_generalized_moment(const TupleData& input, const FunctionSpec& f, const GFunc& g,
                                int k);

// Standalone mirror of the in-protocol two-level sampler: server ~ C_t / B,
// then index ~ f(a_ti) / C_t. Returns (server, index) draws; marginal over
// indices is B_i / B.
std::vector<std::pair<int, std::int64_t>> two_level_draws(const PartitionedVectors& input,
                                                          const FunctionSpec& f,
                                                          std::int64_t count,
                                                          std::uint64_t seed);

}  // namespace distsketch
