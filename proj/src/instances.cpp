/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <cmath>
#include <stdexcept>

#include "distsketch/instances.hpp"

namespace distsketch {

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

void check_lowrank_args(int servers, Index n, Index d, int k_signal) {
  if (servers < 1) throw std::invalid_argument("instance: servers must be >= 1");
  if (n < 1 || d < 1) throw std::invalid_argument("instance: dimensions must be >= 1");
  if (k_signal < 1 || k_signal > std::min(n, d))
    throw std::invalid_argument("instance: k_signal out of range");
}

}  // namespace

PartitionedMatrix gen_lowrank_signal_noise(int servers, Index n, Index d, int k_signal,
                                           double signal, double noise, std::uint64_t seed) {
  check_lowrank_args(servers, n, d, k_signal);
  Rng shared(derive_key(seed, 0x51));
  const Matrix left = gaussian(n, k_signal, shared);
  const Matrix right = gaussian(d, k_signal, shared);
  const Matrix base = (signal / static_cast<double>(servers) / std::sqrt(k_signal)) * left *
                      right.transpose();
  PartitionedMatrix out;
  out.blocks.reserve(static_cast<std::size_t>(servers));
  const double noise_scale = noise / std::sqrt(static_cast<double>(servers));
  for (int t = 1; t <= servers; ++t) {
    Rng local(derive_key(seed, 0x52, static_cast<std::uint64_t>(t)));
    if (noise_scale == 0.0)
      out.blocks.push_back(base);
    else
      out.blocks.push_back(base + noise_scale * gaussian(n, d, local));
  }
  return out;
}

PartitionedMatrix gen_lowrank_split(int servers, Index n, Index d, int k_signal, double signal,
                                    double noise, std::uint64_t seed) {
  check_lowrank_args(servers, n, d, k_signal);
  Rng shared(derive_key(seed, 0x53));
  const Matrix left = gaussian(n, k_signal, shared);
  const Matrix right = gaussian(d, k_signal, shared);
  Matrix target = (signal / std::sqrt(k_signal)) * left * right.transpose();
  if (noise != 0.0) target += noise * gaussian(n, d, shared);

  PartitionedMatrix out;
  out.blocks.reserve(static_cast<std::size_t>(servers));
  Matrix rest = target;
  const double share_scale = std::abs(signal) > 0.0 ? std::abs(signal) : 1.0;
  for (int t = 1; t < servers; ++t) {
    Rng local(derive_key(seed, 0x54, static_cast<std::uint64_t>(t)));
    Matrix share = share_scale * gaussian(n, d, local);
    rest -= share;
    out.blocks.push_back(std::move(share));
  }
  out.blocks.push_back(std::move(rest));
  return out;
}

PartitionedVectors gen_moment_vectors(int servers, Index n, const std::string& profile,
                                      std::uint64_t seed) {
  if (servers < 1) throw std::invalid_argument("instance: servers must be >= 1");
  if (n < 1) throw std::invalid_argument("instance: n must be >= 1");
  PartitionedVectors out;
  out.vectors.assign(static_cast<std::size_t>(servers), Vector::Zero(n));
  Rng rng(derive_key(seed, 0x55));
  if (profile == "disjoint") {
    for (Index i = 0; i < n; ++i) {
      const auto owner = static_cast<std::size_t>(i % servers);
      out.vectors[owner](i) = 1.0 + 9.0 * rng.next_double();
    }
  } else if (profile == "shared") {
    for (int t = 0; t < servers; ++t)
      for (Index i = 0; i < n; ++i)
        out.vectors[static_cast<std::size_t>(t)](i) =
            static_cast<double>(1 + i % 7) * (0.5 + rng.next_double());
  } else if (profile == "heavy") {
    const Index head = std::max<Index>(1, n / 20);
    for (Index i = 0; i < head; ++i)
      for (int t = 0; t < servers; ++t)
        out.vectors[static_cast<std::size_t>(t)](i) = 5.0 + 5.0 * rng.next_double();
    for (Index i = head; i < n; ++i) {
      const auto owner = static_cast<std::size_t>(i % servers);
      out.vectors[owner](i) = 1.0 + rng.next_double();
    }
  } else if (profile == "constant") {
    for (Index i = 0; i < n; ++i) {
      const double v = 1.0 + 9.0 * rng.next_double();
      for (int t = 0; t < servers; ++t) out.vectors[static_cast<std::size_t>(t)](i) = v;
    }
  } else if (profile == "uniform") {
    for (int t = 0; t < servers; ++t)
      for (Index i = 0; i < n; ++i)
        out.vectors[static_cast<std::size_t>(t)](i) = rng.next_double();
  } else {
    throw std::invalid_argument("instance: unknown profile '" + profile + "'");
  }
  return out;
}

TupleData gen_tuple_data(int servers, int rows_per_server, Index n, double density,
                         std::uint64_t seed) {
  if (servers < 1 || rows_per_server < 1)
    throw std::invalid_argument("instance: servers and rows must be >= 1");
  if (n < 1) throw std::invalid_argument("instance: n must be >= 1");
  if (!(density >= 0.0) || density > 1.0)
    throw std::invalid_argument("instance: density must be in [0, 1]");
  TupleData out;
  out.per_server.reserve(static_cast<std::size_t>(servers));
  for (int t = 1; t <= servers; ++t) {
    Rng rng(derive_key(seed, 0x56, static_cast<std::uint64_t>(t)));
    Matrix m = Matrix::Zero(rows_per_server, n);
    for (Index r = 0; r < rows_per_server; ++r)
      for (Index i = 0; i < n; ++i)
        if (rng.next_double() < density) m(r, i) = 1.0;
    out.per_server.push_back(std::move(m));
  }
  return out;
}

}  // namespace distsketch
