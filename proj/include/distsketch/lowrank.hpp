/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <vector>

#include "distsketch/commsim.hpp"
#include "distsketch/linalg.hpp"

namespace distsketch {

// Additively shared matrix: the logical input is the sum of the blocks, one
// n x d block per server. Blocks may be arbitrary as long as they sum to the
// target.
struct PartitionedMatrix {
  std::vector<Matrix> blocks;

  int servers() const { return static_cast<int>(blocks.size()); }
  Index n() const { return blocks.empty() ? 0 : blocks.front().rows(); }
  Index d() const { return blocks.empty() ? 0 : blocks.front().cols(); }
  Matrix materialize() const;
  void validate() const;  // nonempty, consistent dims, finite
};

// Distributed representation of the rank-<=k output: the approximation is
// (sum_t projected_blocks[t]) * V * V^T * U^T, held without materializing.
struct LowRankFactors {
  Matrix u;                             // d x c, orthonormal columns
  Matrix v;                             // c x k', orthonormal columns
  std::vector<Matrix> projected_blocks; // per server, n x c
  Index rank_bound() const { return v.cols(); }
};

struct LowRankConfig {
  double sketch_rows_factor = 4.0;  // m_s = ceil(factor * k / eps)
  double embed_rows_factor = 4.0;   // m_p = ceil(factor * m_s / eps^2)
  int sketch_indep_extra = 4;       // sign sketch independence t = k + extra
  bool bit_bounded = false;         // variant exchanging sketched products only
  bool parallel = false;
};

struct LowRankResult {
  LowRankFactors factors;
  CommLedger ledger;
  Index m_s = 0;  // sign sketch rows
  Index m_p = 0;  // embedding rows
  Index basis_cols = 0;  // c = numerical rank of the summed sketch
};

// Two-stage sketched compression over the fabric. Requires 1 <= k <=
// min(n, d) and eps in (0, 1]. The returned factors satisfy
// ||A - C||_F <= (1 + 5 eps) * best_rank_k_error(A) with constant
// probability; rounds <= 4.
LowRankResult adaptive_compress(const PartitionedMatrix& input, Index k, double eps,
                                std::uint64_t master_seed, const LowRankConfig& config = {});

// ||A - C||_F materialized from the factors. Test/report helper; this sum is
// exactly what the distributed representation denotes.
double implied_error(const PartitionedMatrix& input, const LowRankFactors& factors);

}  // namespace distsketch
