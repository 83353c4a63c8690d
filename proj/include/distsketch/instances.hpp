/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <string>

#include "distsketch/lowrank.hpp"
#include "distsketch/moments.hpp"

namespace distsketch {

// Deterministic synthetic inputs shared by the CLI and the test suite.
// Every generator is a pure function of its arguments.

// Per-server blocks (sig/s) * L R^T / sqrt(k) + (noise/sqrt(s)) * G_t with a
// shared n x k_signal factor pair; the aggregate is a rank-k_signal signal in
// Gaussian noise. noise = 0 gives an exactly rank-k_signal aggregate.
PartitionedMatrix gen_lowrank_signal_noise(int servers, Index n, Index d, int k_signal,
                                           double signal, double noise, std::uint64_t seed);

// Same aggregate, adversarial split: servers 1..s-1 hold dense Gaussian
// blocks of comparable norm, server s holds the difference. Single blocks
// carry no trace of the target's spectrum.
PartitionedMatrix gen_lowrank_split(int servers, Index n, Index d, int k_signal, double signal,
                                    double noise, std::uint64_t seed);

// Nonnegative vector banks for the moment estimators. Profiles:
//   "disjoint" -- each index lives on one server (round robin), value in [1, 10]
//   "shared"   -- every server holds every index, weights cycle through 1..7
//   "heavy"    -- shared heavy hitters (first ~n/20 indices on all servers)
//                 over a disjoint light tail
//   "uniform"  -- i.i.d. uniform [0, 1) everywhere
//   "constant" -- every server holds the identical vector, so the density
//                 ratio is exactly s^(k-1) at every index
PartitionedVectors gen_moment_vectors(int servers, Index n, const std::string& profile,
                                      std::uint64_t seed);

// Binary incidence banks: rows_per_server vectors per server over n items,
// each entry 1 with the given density. Feeds the correlation estimator.
TupleData gen_tuple_data(int servers, int rows_per_server, Index n, double density,
                         std::uint64_t seed);

}  // namespace distsketch
