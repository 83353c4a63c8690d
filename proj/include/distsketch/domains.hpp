/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "distsketch/function_spec.hpp"
#include "distsketch/linalg.hpp"
#include "distsketch/rng.hpp"

namespace distsketch {

// Element identifier inside a server-local domain: one index for vectors,
// k indices for tuple domains.
using DomainKey = std::vector<std::int64_t>;

// Server-side view of a weighted domain, bound to a fixed f. draw() returns
// iid elements x with probability f(weight(x)) / mass_f(); with f = identity
// that is exactly the weight distribution.
class SampleableDomain {
 public:
  virtual ~SampleableDomain() = default;
  virtual double mass_f() const = 0;  // sum over the domain of f(weight(x))
  virtual void draw(Rng& rng, std::int64_t count, std::vector<DomainKey>& out) const = 0;
  // Multiplicity counts of `count` draws, keys ascending. Consumes exactly
  // the randomness draw() would; overrides may skip materializing each key.
  virtual std::vector<std::pair<DomainKey, std::int64_t>> draw_counts(
      Rng& rng, std::int64_t count) const;
  virtual double weight(const DomainKey& key) const = 0;
  virtual int key_arity() const = 0;
};

// Finite nonnegative vector. Draws invert the f-mass prefix table.
class VectorDomain final : public SampleableDomain {
 public:
  VectorDomain(Vector values, const FunctionSpec& f);
  double mass_f() const override { return mass_; }
  void draw(Rng& rng, std::int64_t count, std::vector<DomainKey>& out) const override;
  std::vector<std::pair<DomainKey, std::int64_t>> draw_counts(
      Rng& rng, std::int64_t count) const override;
  double weight(const DomainKey& key) const override;
  int key_arity() const override { return 1; }

 private:
  Vector values_;
  std::vector<double> cdf_;
  double mass_ = 0.0;
};

using GFunc = std::function<double(std::span<const double>)>;
GFunc product_g();

// Ordered distinct k-tuples over the column index set of a bank of vectors
// (rows of `vectors`), with weight a(j) = sum over rows of g applied to the
// row's entries at j. Nothing is materialized: mass and draws stream the
// lexicographic enumeration, draws keeping one reservoir slot per requested
// sample. k <= 3.
class TupleDomain final : public SampleableDomain {
 public:
  TupleDomain(Matrix vectors, FunctionSpec f, GFunc g, int k);
  double mass_f() const override { return mass_; }
  void draw(Rng& rng, std::int64_t count, std::vector<DomainKey>& out) const override;
  double weight(const DomainKey& key) const override;
  int key_arity() const override { return k_; }

  std::int64_t domain_size() const;  // n * (n-1) * ... * (n-k+1)

 private:
  double tuple_weight(std::span<const std::int64_t> idx) const;
  Matrix vectors_;
  FunctionSpec f_;
  GFunc g_;
  int k_;
  double mass_ = 0.0;
};

struct TupleSample {
  DomainKey tuple;
  double total_f_mass = 0.0;  // sum over all tuples of f(a(j))
  double sample_weight = 0.0; // a(j) of the held tuple
  double sample_f = 0.0;      // f(a(j)) of the held tuple
};

// One lexicographic pass holding a single sample; on return the held tuple j
// has probability exactly f(a(j)) / total mass. Zero total mass yields
// nullopt.
std::optional<TupleSample> rejection_sample_tuple(const Matrix& vectors, const FunctionSpec& f,
                                                  const GFunc& g, int k, Rng& rng);

}  // namespace distsketch
