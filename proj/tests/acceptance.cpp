/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Acceptance gate: nine end-to-end criteria, one pass/fail line each.
 * Exit code is the number of failed criteria.
 */
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "distsketch/instances.hpp"
#include "distsketch/lowrank.hpp"
#include "distsketch/moments.hpp"

using namespace distsketch;

namespace {

double elapsed_s(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix reconstruction(const LowRankFactors& f) {
  Matrix projected = f.projected_blocks.at(0);
  for (std::size_t t = 1; t < f.projected_blocks.size(); ++t)
    projected += f.projected_blocks[t];
  return projected * f.v * f.v.transpose() * f.u.transpose();
}

Index numerical_rank(const Matrix& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) r += sv(i) > tol * sv(0) ? 1 : 0;
  return r;
}

// --- criterion 1: low-rank accuracy ---------------------------------------

bool criterion_1(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const auto input = gen_lowrank_signal_noise(4, 500, 40, 5, 10.0, 0.1, 7);
  const Matrix a = input.materialize();
  const double fk = best_rank_k_error(a, 5);
  int good_ratio = 0, good_rank = 0;
  for (int i = 0; i < 20; ++i) {
    const auto res = adaptive_compress(input, 5, 0.5, 1000 + i);
    const double ratio = implied_error(input, res.factors) / fk;
    good_ratio += ratio <= 1.5 ? 1 : 0;
    good_rank += numerical_rank(reconstruction(res.factors), 1e-8) <= 5 ? 1 : 0;
  }
  const double secs = elapsed_s(start);
  std::ostringstream d;
  d << "ratio<=1.5 in " << good_ratio << "/20, rank<=5 in " << good_rank << "/20, "
    << secs << "s";
  detail = d.str();
  return good_ratio >= 18 && good_rank == 20 && secs < 30.0;
}

// --- criterion 2: low-rank exactness on rank-k inputs ----------------------

bool criterion_2(std::string& detail) {
  int good = 0;
  for (int i = 0; i < 20; ++i) {
    const auto input = gen_lowrank_signal_noise(4, 120, 24, 5, 5.0, 0.0, 900 + i);
    const Matrix a = input.materialize();
    const double fk = best_rank_k_error(a, 5);
    const auto res = adaptive_compress(input, 5, 0.5, 2000 + i);
    const double err = implied_error(input, res.factors);
    const double ratio =
        fk > 1e-12 * a.norm() ? err / fk : (err <= 1e-6 * a.norm() ? 1.0 : 2.0);
    good += ratio <= 1.0 + 1e-6 ? 1 : 0;
  }
  detail = "ratio<=1+1e-6 in " + std::to_string(good) + "/20";
  return good == 20;
}

// --- criterion 3: low-rank communication ----------------------------------

bool criterion_3(std::string& detail) {
  const auto input = gen_lowrank_signal_noise(4, 500, 40, 5, 10.0, 0.1, 7);
  const auto res = adaptive_compress(input, 5, 0.5, 3000);
  const double s = 4, d = 40, k = 5;
  const double ms = static_cast<double>(res.m_s), mp = static_cast<double>(res.m_p);
  const double budget = 50.0 * (s * d * ms + s * mp * ms + s * ms * k + ms * d);
  const double words = static_cast<double>(res.ledger.total_words());
  const bool words_ok = words <= budget;
  const bool rounds_ok = res.ledger.rounds() <= 4;

  auto words_at = [](Index dim) {
    const auto inst = gen_lowrank_signal_noise(4, 100, dim, 2, 10.0, 0.1, 8);
    return static_cast<double>(
        adaptive_compress(inst, 2, 0.5, 3100).ledger.total_words());
  };
  const double w20 = words_at(20), w40 = words_at(40), w80 = words_at(80);
  const double slope_ratio = (w80 - w40) / (w40 - w20);
  const bool linear_ok = slope_ratio >= 1.8 && slope_ratio <= 2.2;

  std::ostringstream ds;
  ds << "words " << words << " <= " << budget << ", rounds " << res.ledger.rounds()
     << " <= 4, d-sweep increment ratio " << slope_ratio << " in [1.8, 2.2]";
  detail = ds.str();
  return words_ok && rounds_ok && linear_ok;
}

// --- criterion 4: distributed sum ------------------------------------------

bool criterion_4(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const auto input = gen_moment_vectors(5, 1000, "uniform", 11);
  const auto f = power_moment(2, 5);
  const double exact = exact_moment(input, f);
  const double word_budget = 10.0 * 25.0 * f.c_fs / (0.1 * 0.1);

  // Parallel fabric execution is estimate-identical to serial; it only
  // speeds up the 1000-seed sweep.
  SumConfig cfg;
  cfg.parallel = true;

  int good = 0;
  bool budgets_ok = true;
  double mean = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto res = distributed_sum(input, f, 0.1, 4000 + i, cfg);
    mean += res.estimate;
    if (i < 100) {
      good += std::abs(res.estimate - exact) <= 0.1 * exact ? 1 : 0;
      budgets_ok = budgets_ok && res.ledger.rounds() <= 4 &&
                   static_cast<double>(res.ledger.total_words()) <= word_budget;
    }
  }
  mean /= 1000.0;
  const double secs = elapsed_s(start);
  const bool mean_ok = std::abs(mean - exact) <= 0.03 * exact;

  std::ostringstream d;
  d << "rel<=0.1 in " << good << "/100, |mean-A|/A = " << std::abs(mean - exact) / exact
    << " <= 0.03, budgets " << (budgets_ok ? "ok" : "violated") << ", " << secs << "s";
  detail = d.str();
  return good >= 95 && mean_ok && budgets_ok && secs < 60.0;
}

// --- criterion 5: sampling marginals ---------------------------------------

bool criterion_5(std::string& detail) {
  // Two-level sampler on a fixed 3-server, n=10 fixture with zeros and spread.
  PartitionedVectors input;
  input.vectors = {
      (Vector(10) << 0.5, 0, 1.25, 2, 0.25, 3, 0.01, 0, 4, 1).finished(),
      (Vector(10) << 0, 2, 0.75, 0, 1.5, 0.5, 0, 3, 0.25, 2).finished(),
      (Vector(10) << 1, 1, 0, 2.5, 0, 0, 5, 0.5, 0, 0.125).finished()};
  const auto f = power_moment(2, 3);
  std::vector<double> b(10, 0.0);
  double total = 0.0;
  for (int i = 0; i < 10; ++i) {
    for (const auto& v : input.vectors) b[i] += f.f(v(i));
    total += b[i];
  }
  const auto draws = two_level_draws(input, f, 100000, 55);
  std::vector<double> counts(10, 0.0);
  for (const auto& [server, index] : draws) {
    (void)server;
    counts[static_cast<std::size_t>(index)] += 1.0;
  }
  double tv_two_level = 0.0;
  for (int i = 0; i < 10; ++i)
    tv_two_level += 0.5 * std::abs(counts[i] / 100000.0 - b[i] / total);

  // Rejection sampler over ordered pairs from an n=6 bank, f applied to the
  // row-summed product score of each pair of columns.
  Matrix bank(2, 6);
  bank << 0.5, 0, 2, 1, 0.25, 3, 1, 2, 0.5, 0, 1.5, 0.75;
  const auto f2 = power_moment(2, 1);
  std::map<std::vector<std::int64_t>, double> mass;
  double mass_total = 0.0;
  Rng rng(56);
  std::map<std::vector<std::int64_t>, double> hits;
  const int kDraws = 50000;
  int accepted = 0;
  for (int t = 0; t < kDraws; ++t) {
    const auto s = rejection_sample_tuple(bank, f2, product_g(), 2, rng);
    if (!s) continue;
    ++accepted;
    hits[s->tuple] += 1.0;
    if (mass.find(s->tuple) == mass.end()) mass[s->tuple] = s->sample_f;
  }
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t j = 0; j < 6; ++j) {
      if (i == j) continue;
      const double w = bank(0, i) * bank(0, j) + bank(1, i) * bank(1, j);
      mass_total += f2.f(w);
      if (mass.find({i, j}) == mass.end()) mass[{i, j}] = f2.f(w);
    }
  double tv_rejection = 0.0;
  for (const auto& [tuple, m] : mass) {
    const double emp = hits.count(tuple) ? hits[tuple] / accepted : 0.0;
    tv_rejection += 0.5 * std::abs(emp - m / mass_total);
  }

  std::ostringstream d;
  d << "two-level TV " << tv_two_level << " <= 0.02, rejection TV " << tv_rejection
    << " <= 0.02";
  detail = d.str();
  return tv_two_level <= 0.02 && tv_rejection <= 0.02;
}

// --- criterion 6: generalized moment vs brute force ------------------------

bool criterion_6(std::string& detail) {
  const auto input = gen_tuple_data(2, 2, 8, 0.6, 5);
  const auto f = power_moment(2, 2);

  // Independent oracle: aggregate the banks, then plain loops over the 56
  // ordered pairs of distinct coordinates.
  std::vector<std::vector<double>> rows;
  for (const auto& m : input.per_server)
    for (Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(8);
      for (Index c = 0; c < 8; ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      rows.push_back(row);
    }
  double brute = 0.0;
  int pairs = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      if (i == j) continue;
      ++pairs;
      double w = 0.0;
      for (const auto& row : rows) w += row[i] * row[j];
      brute += f.f(w);
    }
  const double lib = exact_generalized_moment(input, f, product_g(), 2);
  const bool oracle_ok =
      pairs == 56 && std::abs(lib - brute) <= 1e-9 * std::max(1.0, std::abs(brute));

  int good = 0;
  for (int i = 0; i < 100; ++i) {
    const auto res = generalized_moment(input, f, product_g(), 2, 0.25, 5000 + i);
    good += std::abs(res.estimate - brute) <= 0.2 * brute ? 1 : 0;
  }
  std::ostringstream d;
  d << "brute force over " << pairs << " pairs matches library ("
    << (oracle_ok ? "yes" : "no") << "), rel<=0.2 in " << good << "/100";
  detail = d.str();
  return oracle_ok && good >= 80;
}

// --- criterion 7: frequency moments -----------------------------------------

bool criterion_7(std::string& detail) {
  const auto input = gen_moment_vectors(5, 2000, "heavy", 13);
  const double exact = exact_frequency_moment(input, 4);
  const double lns = std::max(std::log(5.0), 1.0);
  const double budget =
      100.0 * (std::pow(5.0, 3.0) + std::pow(5.0, 3.0)) * std::pow(lns / 0.25, 3.0);

  int good = 0;
  bool budgets_ok = true;
  for (int i = 0; i < 100; ++i) {
    const auto res = frequency_moments(input, 4, 0.25, 6000 + i);
    good += std::abs(res.estimate - exact) <= 0.5 * exact ? 1 : 0;
    budgets_ok = budgets_ok && res.ledger.rounds() <= 8 &&
                 static_cast<double>(res.ledger.total_words()) <= budget;
  }

  const auto flat = gen_moment_vectors(5, 2000, "constant", 14);
  const double flat_exact = exact_frequency_moment(flat, 4);
  int coarse_exact = 0;
  for (int i = 0; i < 100; ++i) {
    const auto res = frequency_moments(flat, 4, 0.25, 6500 + i);
    coarse_exact += (res.phase == "coarse" &&
                     std::abs(res.estimate - flat_exact) <= 1e-9 * flat_exact)
                        ? 1
                        : 0;
  }
  std::ostringstream d;
  d << "rel<=0.5 in " << good << "/100, budgets " << (budgets_ok ? "ok" : "violated")
    << ", constant-rho coarse+exact in " << coarse_exact << "/100";
  detail = d.str();
  return good >= 80 && budgets_ok && coarse_exact == 100;
}

// --- criterion 8: Lipschitz variant -----------------------------------------

bool criterion_8(std::string& detail) {
  const auto input = gen_moment_vectors(4, 500, "disjoint", 15);
  const auto f = quartic_quintic(4);
  const double exact = exact_moment(input, f);
  int good = 0;
  for (int i = 0; i < 100; ++i) {
    const auto res = lipschitz_moments(input, f, 0.25, 7000 + i);
    good += std::abs(res.estimate - exact) <= 0.5 * exact ? 1 : 0;
  }

  // f(sum x) / sum f(x) <= (sum x)^L / sum x^L on random nonnegative tuples.
  Rng rng(77);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    double sum = 0.0, fsum = 0.0, psum = 0.0;
    for (int u = 0; u < 4; ++u) {
      const double x = 10.0 * rng.next_double();
      sum += x;
      fsum += f.f(x);
      psum += std::pow(x, 5.0);
    }
    if (fsum == 0.0 || psum == 0.0) continue;
    const double lhs = f.f(sum) / fsum;
    const double rhs = std::pow(sum, 5.0) / psum;
    violations += lhs <= rhs * (1.0 + 1e-12) ? 0 : 1;
  }
  std::ostringstream d;
  d << "rel<=0.5 in " << good << "/100, Lipschitz inequality violations " << violations
    << "/1000";
  detail = d.str();
  return good >= 80 && violations == 0;
}

// --- criterion 9: property suites -------------------------------------------

bool criterion_9(std::string& detail) {
  const std::vector<std::string> suites = {"test_sketch",  "test_linalg",
                                           "test_commsim", "test_lowrank",
                                           "test_moments", "test_moments_freq"};
  std::vector<std::string> failed;
  for (const auto& name : suites) {
    const std::filesystem::path bin = std::filesystem::path(DISTSKETCH_TEST_DIR) / name;
    if (!std::filesystem::exists(bin)) {
      failed.push_back(name + " (missing)");
      continue;
    }
    const std::string cmd = bin.string() + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) failed.push_back(name);
  }
  if (failed.empty()) {
    detail = "all " + std::to_string(suites.size()) + " property suites clean";
    return true;
  }
  detail = "violations in:";
  for (const auto& name : failed) detail += " " + name;
  return false;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* label;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "low-rank accuracy", criterion_1},
      {2, "low-rank exactness on rank-k inputs", criterion_2},
      {3, "low-rank communication budget and scaling", criterion_3},
      {4, "distributed sum accuracy and budget", criterion_4},
      {5, "sampling marginals", criterion_5},
      {6, "generalized moment vs brute force", criterion_6},
      {7, "frequency moments", criterion_7},
      {8, "Lipschitz variant", criterion_8},
      {9, "property suites", criterion_9},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.number << ": "
              << c.label << " (" << detail << ")\n";
    failures += ok ? 0 : 1;
  }
  return failures;
}
