/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "distsketch/sketch.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "distsketch/rng.hpp"

namespace distsketch {

namespace {

// a * b mod 2^61 - 1 using the Mersenne reduction.
inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(prod & SketchSeed::kPrime);
  std::uint64_t hi = static_cast<std::uint64_t>(prod >> 61);
  std::uint64_t r = lo + hi;
  if (r >= SketchSeed::kPrime) r -= SketchSeed::kPrime;
  return r;
}

inline std::uint64_t addmod(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = a + b;
  if (r >= SketchSeed::kPrime) r -= SketchSeed::kPrime;
  return r;
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

SketchSeed SketchSeed::make(std::int64_t rows, std::int64_t cols, std::int64_t independence,
                            std::uint64_t rng_key) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("SketchSeed: dims must be positive");
  if (independence < 1) throw std::invalid_argument("SketchSeed: independence must be >= 1");
  if (static_cast<std::uint64_t>(independence) >= kPrime)
    throw std::invalid_argument("SketchSeed: independence must be below the field size");
  SketchSeed s;
  s.rows = rows;
  s.cols = cols;
  s.field_prime = kPrime;
  s.scale = 1.0 / std::sqrt(static_cast<double>(rows));
  s.poly.resize(static_cast<std::size_t>(independence));
  Rng rng(rng_key);
  for (auto& c : s.poly) {
    std::uint64_t v = rng.next_u64() >> 3;  // 61 bits
    while (v >= kPrime) v = rng.next_u64() >> 3;
    c = v;
  }
  return s;
}

double SketchSeed::entry(std::int64_t i, std::int64_t j) const {
  if (i < 0 || i >= rows || j < 0 || j >= cols)
    throw std::out_of_range("SketchSeed::entry: index out of range");
  // Horner over GF(p) at the flattened position.
  const std::uint64_t x =
      static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(cols) + static_cast<std::uint64_t>(j);
  std::uint64_t xm = x % kPrime;
  std::uint64_t acc = poly.back();
  for (std::size_t r = poly.size() - 1; r-- > 0;) acc = addmod(mulmod(acc, xm), poly[r]);
  return (acc & 1ULL) == 0 ? scale : -scale;
}

Matrix SketchSeed::apply_left(const Matrix& m) const {
  if (m.rows() != cols)
    throw std::invalid_argument("SketchSeed::apply_left: inner dimensions disagree");
  Matrix out = Matrix::Zero(rows, m.cols());
  Vector signs(rows);
  for (std::int64_t j = 0; j < cols; ++j) {
    for (std::int64_t i = 0; i < rows; ++i) signs(i) = entry(i, j);
    out.noalias() += signs * m.row(j);
  }
  return out;
}

std::vector<std::uint8_t> SketchSeed::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(8 * (4 + poly.size()));
  put_u64(out, static_cast<std::uint64_t>(rows));
  put_u64(out, static_cast<std::uint64_t>(cols));
  put_u64(out, static_cast<std::uint64_t>(poly.size()));
  put_u64(out, field_prime);
  for (auto c : poly) put_u64(out, c);
  return out;
}

SketchSeed SketchSeed::from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 32 || bytes.size() % 8 != 0)
    throw std::invalid_argument("SketchSeed::from_bytes: truncated header");
  SketchSeed s;
  s.rows = static_cast<std::int64_t>(get_u64(bytes, 0));
  s.cols = static_cast<std::int64_t>(get_u64(bytes, 8));
  const std::uint64_t t = get_u64(bytes, 16);
  s.field_prime = get_u64(bytes, 24);
  if (s.rows < 1 || s.cols < 1 || s.field_prime != kPrime)
    throw std::invalid_argument("SketchSeed::from_bytes: bad header fields");
  if (bytes.size() != 8 * (4 + t))
    throw std::invalid_argument("SketchSeed::from_bytes: length disagrees with t");
  s.poly.resize(t);
  for (std::uint64_t r = 0; r < t; ++r) s.poly[r] = get_u64(bytes, 32 + 8 * r);
  s.scale = 1.0 / std::sqrt(static_cast<double>(s.rows));
  return s;
}

}  // namespace distsketch
