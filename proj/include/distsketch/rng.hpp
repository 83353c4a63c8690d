/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace distsketch {

// splitmix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-independent key derivation. Streams for (server, round) pairs are
// decorrelated regardless of the schedule that consumes them.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag) {
  return mix64(key + 0x9e3779b97f4a7c15ULL * (tag + 1));
}

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  return derive_key(derive_key(key, a), b);
}

// Counter-based generator: output i is mix64(key + i*gamma), so any draw is a
// pure function of (key, counter). No hidden global state anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = next_double();
    while (u1 == 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  std::uint64_t state_;
};

// Inclusive prefix sums of nonnegative weights.
inline std::vector<double> prefix_sums(std::span<const double> w) {
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }
  return cdf;
}

// Draw an index proportional to the weights behind an inclusive prefix-sum
// table. Total mass must be positive.
inline std::size_t sample_cdf(std::span<const double> cdf, Rng& rng) {
  if (cdf.empty() || cdf.back() <= 0.0)
    throw std::invalid_argument("sample_cdf: empty or zero-mass table");
  const double u = rng.next_double() * cdf.back();
  std::size_t lo = 0, hi = cdf.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cdf[mid] <= u)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace distsketch
