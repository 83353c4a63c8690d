/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "distsketch/domains.hpp"

#include <map>

#include <cmath>
#include <stdexcept>

namespace distsketch {

namespace {

// Visits ordered distinct k-tuples over [0, n) in lexicographic order.
template <typename F>
void for_each_tuple(std::int64_t n, int k, F&& visit) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(k), 0);
  const auto rec = [&](auto&& self, int pos) -> void {
    if (pos == k) {
      visit(std::span<const std::int64_t>(idx));
      return;
    }
    for (std::int64_t j = 0; j < n; ++j) {
      bool dup = false;
      for (int q = 0; q < pos; ++q)
        if (idx[static_cast<std::size_t>(q)] == j) {
          dup = true;
          break;
        }
      if (dup) continue;
      idx[static_cast<std::size_t>(pos)] = j;
      self(self, pos + 1);
    }
  };
  rec(rec, 0);
}

}  // namespace

VectorDomain::VectorDomain(Vector values, const FunctionSpec& f) : values_(std::move(values)) {
  if (values_.size() < 1) throw std::invalid_argument("VectorDomain: empty vector");
  std::vector<double> fw(static_cast<std::size_t>(values_.size()));
  for (Index i = 0; i < values_.size(); ++i) {
    const double v = values_(i);
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("VectorDomain: entries must be nonnegative and finite");
    fw[static_cast<std::size_t>(i)] = f(v);
    if (fw[static_cast<std::size_t>(i)] < 0.0)
      throw FunctionSpecError("VectorDomain: f produced a negative value");
  }
  cdf_ = prefix_sums(fw);
  mass_ = cdf_.empty() ? 0.0 : cdf_.back();
}

void VectorDomain::draw(Rng& rng, std::int64_t count, std::vector<DomainKey>& out) const {
  if (mass_ <= 0.0) throw std::invalid_argument("VectorDomain::draw: zero mass");
  for (std::int64_t c = 0; c < count; ++c)
    out.push_back({static_cast<std::int64_t>(sample_cdf(cdf_, rng))});
}

std::vector<std::pair<DomainKey, std::int64_t>> SampleableDomain::draw_counts(
    Rng& rng, std::int64_t count) const {
  std::vector<DomainKey> draws;
  draws.reserve(static_cast<std::size_t>(count));
  draw(rng, count, draws);
  std::map<DomainKey, std::int64_t> hist;
  for (auto& d : draws) ++hist[std::move(d)];
  return {hist.begin(), hist.end()};
}

std::vector<std::pair<DomainKey, std::int64_t>> VectorDomain::draw_counts(
    Rng& rng, std::int64_t count) const {
  if (mass_ <= 0.0) throw std::invalid_argument("VectorDomain::draw: zero mass");
  std::vector<std::int64_t> hist(static_cast<std::size_t>(values_.size()), 0);
  for (std::int64_t c = 0; c < count; ++c) ++hist[sample_cdf(cdf_, rng)];
  std::vector<std::pair<DomainKey, std::int64_t>> out;
  for (std::size_t i = 0; i < hist.size(); ++i)
    if (hist[i] > 0) out.push_back({{static_cast<std::int64_t>(i)}, hist[i]});
  return out;
}

double VectorDomain::weight(const DomainKey& key) const {
  if (key.size() != 1 || key[0] < 0 || key[0] >= values_.size())
    throw std::invalid_argument("VectorDomain::weight: bad key");
  return values_(key[0]);
}

GFunc product_g() {
  return [](std::span<const double> xs) {
    double p = 1.0;
    for (double x : xs) p *= x;
    return p;
  };
}

TupleDomain::TupleDomain(Matrix vectors, FunctionSpec f, GFunc g, int k)
    : vectors_(std::move(vectors)), f_(std::move(f)), g_(std::move(g)), k_(k) {
  if (k_ < 1 || k_ > 3) throw std::invalid_argument("TupleDomain: k must be in [1, 3]");
  if (vectors_.rows() < 1 || vectors_.cols() < k_)
    throw std::invalid_argument("TupleDomain: need at least k columns");
  double mass = 0.0;
  for_each_tuple(vectors_.cols(), k_, [&](std::span<const std::int64_t> idx) {
    const double fv = f_(tuple_weight(idx));
    if (fv < 0.0 || !std::isfinite(fv))
      throw FunctionSpecError("TupleDomain: f(a(j)) must be nonnegative and finite");
    mass += fv;
  });
  mass_ = mass;
}

double TupleDomain::tuple_weight(std::span<const std::int64_t> idx) const {
  double acc = 0.0;
  double args[3];
  for (Index r = 0; r < vectors_.rows(); ++r) {
    for (int q = 0; q < k_; ++q) args[q] = vectors_(r, idx[static_cast<std::size_t>(q)]);
    const double gv = g_(std::span<const double>(args, static_cast<std::size_t>(k_)));
    if (gv < 0.0 || !std::isfinite(gv))
      throw std::invalid_argument("TupleDomain: g must be nonnegative and finite");
    acc += gv;
  }
  return acc;
}

std::int64_t TupleDomain::domain_size() const {
  std::int64_t size = 1;
  for (int q = 0; q < k_; ++q) size *= vectors_.cols() - q;
  return size;
}

void TupleDomain::draw(Rng& rng, std::int64_t count, std::vector<DomainKey>& out) const {
  if (mass_ <= 0.0) throw std::invalid_argument("TupleDomain::draw: zero mass");
  if (count <= 0) return;
  // One streaming pass, `count` independent single-slot reservoirs: each slot
  // replaces its held tuple with probability f(a(j)) / (mass so far incl. j).
  std::vector<DomainKey> held(static_cast<std::size_t>(count));
  double total = 0.0;
  for_each_tuple(vectors_.cols(), k_, [&](std::span<const std::int64_t> idx) {
    const double w = f_(tuple_weight(idx));
    if (w <= 0.0) return;
    total += w;
    const double p = w / total;
    for (auto& slot : held)
      if (rng.next_double() < p) slot.assign(idx.begin(), idx.end());
  });
  for (auto& slot : held) out.push_back(std::move(slot));
}

double TupleDomain::weight(const DomainKey& key) const {
  if (static_cast<int>(key.size()) != k_)
    throw std::invalid_argument("TupleDomain::weight: bad arity");
  for (std::size_t q = 0; q < key.size(); ++q) {
    if (key[q] < 0 || key[q] >= vectors_.cols())
      throw std::invalid_argument("TupleDomain::weight: index out of range");
    for (std::size_t p = 0; p < q; ++p)
      if (key[p] == key[q]) throw std::invalid_argument("TupleDomain::weight: repeated index");
  }
  return tuple_weight(std::span<const std::int64_t>(key));
}

std::optional<TupleSample> rejection_sample_tuple(const Matrix& vectors, const FunctionSpec& f,
                                                  const GFunc& g, int k, Rng& rng) {
  TupleDomain domain(vectors, f, g, k);
  if (domain.mass_f() <= 0.0) return std::nullopt;
  std::vector<DomainKey> out;
  domain.draw(rng, 1, out);
  TupleSample s;
  s.tuple = std::move(out.front());
  s.total_f_mass = domain.mass_f();
  s.sample_weight = domain.weight(s.tuple);
  s.sample_f = f(s.sample_weight);
  return s;
}

}  // namespace distsketch
