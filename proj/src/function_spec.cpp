/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "distsketch/function_spec.hpp"

#include <algorithm>
#include <cmath>

namespace distsketch {

namespace {

// Tuples are drawn across several magnitudes so non-homogeneous functions are
// audited away from a single scale.
constexpr double kScales[] = {1e-3, 0.1, 1.0, 10.0, 1e3};

}  // namespace

double c_fs_power(int k, int s) {
  if (k < 1 || s < 1) throw std::invalid_argument("c_fs_power: k and s must be positive");
  return std::pow(static_cast<double>(s), k - 1);
}

FunctionSpec power_moment(int k, int s) {
  if (k < 1) throw std::invalid_argument("power_moment: k must be >= 1");
  FunctionSpec spec;
  spec.name = "x^" + std::to_string(k);
  spec.f = [k](double x) { return std::pow(x, k); };
  spec.c_fs = c_fs_power(k, s);
  spec.lipschitz_order = static_cast<double>(k);
  return spec;
}

FunctionSpec quartic_quintic(int s) {
  FunctionSpec spec;
  spec.name = "x^4+x^5";
  spec.f = [](double x) {
    const double x2 = x * x;
    return x2 * x2 * (1.0 + x);
  };
  spec.c_fs = std::pow(static_cast<double>(s), 4);
  spec.lipschitz_order = 5.0;
  return spec;
}

FunctionSpec table_function(const std::string& name,
                            std::vector<std::pair<double, double>> points, double c_fs,
                            std::optional<double> lipschitz_order) {
  if (points.size() < 2) throw std::invalid_argument("table_function: need at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].first) || !std::isfinite(points[i].second) ||
        points[i].second < 0.0)
      throw std::invalid_argument("table_function: points must be finite and nonnegative");
    if (i > 0 && (points[i].first <= points[i - 1].first || points[i].second < points[i - 1].second))
      throw std::invalid_argument("table_function: points must be increasing and monotone");
  }
  FunctionSpec spec;
  spec.name = name;
  spec.c_fs = c_fs;
  spec.lipschitz_order = lipschitz_order;
  spec.f = [pts = std::move(points)](double x) {
    if (x <= pts.front().first) {
      // Linear from the origin-side: clamp below the first point.
      return pts.front().second * (x <= 0.0 ? 0.0 : x / pts.front().first);
    }
    auto it = std::lower_bound(pts.begin(), pts.end(), x,
                               [](const auto& p, double v) { return p.first < v; });
    if (it == pts.end()) {
      const auto& a = pts[pts.size() - 2];
      const auto& b = pts.back();
      const double slope = (b.second - a.second) / (b.first - a.first);
      return b.second + slope * (x - b.first);
    }
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double w = (x - a.first) / (b.first - a.first);
    return a.second + w * (b.second - a.second);
  };
  return spec;
}

void spot_check_c_fs(const FunctionSpec& spec, int s, Rng& rng, int trials) {
  if (s < 1) throw std::invalid_argument("spot_check_c_fs: s must be positive");
  std::vector<double> parts(static_cast<std::size_t>(s));
  for (int trial = 0; trial < trials; ++trial) {
    const double scale = kScales[static_cast<std::size_t>(trial) % std::size(kScales)];
    double sum = 0.0, fsum = 0.0;
    for (auto& p : parts) {
      p = rng.next_double() * scale;
      sum += p;
      fsum += spec(p);
    }
    const double lhs = spec(sum);
    if (lhs > spec.c_fs * fsum * (1.0 + 1e-9) + 1e-300)
      throw FunctionSpecError("c_fs violated for " + spec.name + ": f(sum)=" +
                              std::to_string(lhs) + " > c_fs * sum f = " +
                              std::to_string(spec.c_fs * fsum));
  }
}

void spot_check_superadditive(const FunctionSpec& spec, int s, Rng& rng, int trials) {
  std::vector<double> parts(static_cast<std::size_t>(s));
  for (int trial = 0; trial < trials; ++trial) {
    const double scale = kScales[static_cast<std::size_t>(trial) % std::size(kScales)];
    double sum = 0.0, fsum = 0.0;
    for (auto& p : parts) {
      p = rng.next_double() * scale;
      sum += p;
      fsum += spec(p);
    }
    if (spec(sum) < fsum * (1.0 - 1e-9) - 1e-300)
      throw FunctionSpecError("superadditivity violated for " + spec.name);
  }
}

void spot_check_lipschitz_order(const FunctionSpec& spec, Rng& rng, int trials) {
  if (!spec.lipschitz_order)
    throw FunctionSpecError("lipschitz order required but absent for " + spec.name);
  const double order = *spec.lipschitz_order;
  for (int trial = 0; trial < trials; ++trial) {
    const double scale = kScales[static_cast<std::size_t>(trial) % std::size(kScales)];
    double x = rng.next_double() * scale, y = rng.next_double() * scale;
    if (x < y) std::swap(x, y);
    if (y <= 0.0 || spec(y) <= 0.0) continue;
    const double lhs = spec(x) / spec(y);
    const double rhs = std::pow(x / y, order);
    if (lhs > rhs * (1.0 + 1e-9))
      throw FunctionSpecError("lipschitz order violated for " + spec.name);
  }
}

}  // namespace distsketch
