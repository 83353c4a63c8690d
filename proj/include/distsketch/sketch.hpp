/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <vector>

#include "distsketch/linalg.hpp"

namespace distsketch {

// Compact description of a dense random sign matrix with t-wise independent
// entries. Entry (i, j) is sign(p(i*cols + j)) / sqrt(rows) where p is a
// degree-(t-1) polynomial over GF(2^61 - 1); the matrix is never stored, only
// expanded on demand, so a seed travels as t + 4 words.
struct SketchSeed {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::uint64_t field_prime = 0;
  std::vector<std::uint64_t> poly;  // poly.size() == independence t
  double scale = 0.0;               // 1/sqrt(rows)

  static constexpr std::uint64_t kPrime = (1ULL << 61) - 1;

  // Draws the t polynomial coefficients from the given stream key.
  static SketchSeed make(std::int64_t rows, std::int64_t cols, std::int64_t independence,
                         std::uint64_t rng_key);

  std::int64_t independence() const { return static_cast<std::int64_t>(poly.size()); }

  // Expanded entry value: +scale or -scale. Bounds-checked.
  double entry(std::int64_t i, std::int64_t j) const;

  // S * M for an n x d matrix M with n == cols. Streams one row of M at a
  // time; peak extra memory is the rows x d output.
  Matrix apply_left(const Matrix& m) const;

  // Words a serialized seed occupies on the wire: t + 4.
  std::uint64_t word_count() const { return poly.size() + 4; }

  // Canonical byte encoding: 8-byte little-endian rows, cols, t, prime,
  // then t 8-byte coefficients.
  std::vector<std::uint8_t> to_bytes() const;
  static SketchSeed from_bytes(const std::vector<std::uint8_t>& bytes);

  bool operator==(const SketchSeed&) const = default;
};

}  // namespace distsketch
