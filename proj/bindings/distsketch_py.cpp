/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Python bindings for the main operations. Inputs are numpy arrays (one per
 * server); results come back as plain dicts with the communication ledger
 * attached. Correlation entry points fix g to the coordinatewise product.
 */
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distsketch/lowrank.hpp"
#include "distsketch/moments.hpp"

namespace py = pybind11;
using namespace distsketch;

namespace {

py::dict ledger_dict(const CommLedger& ledger) {
  const LedgerSummary s = ledger.summary();
  py::dict d;
  d["rounds"] = s.rounds;
  d["total_words"] = s.total_words;
  d["words_by_round"] = s.words_by_round;
  d["words_by_server"] = s.words_by_server;
  return d;
}

PartitionedVectors make_vectors(std::vector<Vector> vectors) {
  PartitionedVectors input;
  input.vectors = std::move(vectors);
  return input;
}

TupleData make_tuples(std::vector<Matrix> banks) {
  TupleData input;
  input.per_server = std::move(banks);
  return input;
}

py::dict moment_result_dict(double estimate, const CommLedger& ledger) {
  py::dict d;
  d["estimate"] = estimate;
  d["words"] = ledger.total_words();
  d["rounds"] = ledger.rounds();
  d["ledger"] = ledger_dict(ledger);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "distributed sketching and sampling protocols over a simulated fabric";

  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<FunctionSpecError>(m, "FunctionSpecError", PyExc_ValueError);

  py::class_<FunctionSpec>(m, "FunctionSpec")
      .def_readonly("name", &FunctionSpec::name)
      .def_readonly("c_fs", &FunctionSpec::c_fs)
      .def_readonly("lipschitz_order", &FunctionSpec::lipschitz_order)
      .def("__call__", [](const FunctionSpec& f, double x) { return f.f(x); })
      .def("__repr__", [](const FunctionSpec& f) {
        return "FunctionSpec(" + f.name + ", c_fs=" + std::to_string(f.c_fs) + ")";
      });

  m.def("power_moment", &power_moment, py::arg("k"), py::arg("servers"),
        "f = x^k with c_fs = servers^(k-1) and Lipschitz order k");
  m.def("quartic_quintic", &quartic_quintic, py::arg("servers"),
        "f = x^4 + x^5 with c_fs = servers^4 and Lipschitz order 5");
  m.def(
      "table_function",
      [](const std::string& name, std::vector<std::pair<double, double>> points,
         double c_fs, std::optional<double> lipschitz_order) {
        return table_function(name, std::move(points), c_fs, lipschitz_order);
      },
      py::arg("name"), py::arg("points"), py::arg("c_fs"),
      py::arg("lipschitz_order") = std::nullopt,
      "piecewise-linear f through (x, y) knots, linear from (0, 0) below the "
      "first knot and affinely extended beyond the last");

  // ---- low rank -----------------------------------------------------------

  m.def(
      "adaptive_compress",
      [](std::vector<Matrix> blocks, Index k, double eps, std::uint64_t seed,
         bool bit_bounded) {
        PartitionedMatrix input;
        input.blocks = std::move(blocks);
        LowRankConfig cfg;
        cfg.bit_bounded = bit_bounded;
        const LowRankResult res = adaptive_compress(input, k, eps, seed, cfg);
        py::dict d;
        d["u"] = res.factors.u;
        d["v"] = res.factors.v;
        d["projected_blocks"] = res.factors.projected_blocks;
        d["rank_bound"] = res.factors.rank_bound();
        d["error"] = implied_error(input, res.factors);
        d["m_s"] = res.m_s;
        d["m_p"] = res.m_p;
        d["basis_cols"] = res.basis_cols;
        d["words"] = res.ledger.total_words();
        d["rounds"] = res.ledger.rounds();
        d["ledger"] = ledger_dict(res.ledger);
        return d;
      },
      py::arg("blocks"), py::arg("k"), py::arg("eps"), py::arg("seed"),
      py::arg("bit_bounded") = false,
      "run the three-round sketched low-rank protocol on additively "
      "partitioned blocks; error is ||A - A U V V^T U^T||_F");

  m.def("best_rank_k_error", &best_rank_k_error, py::arg("a"), py::arg("k"),
        "Frobenius error of the best rank-k approximation (SVD oracle)");

  // ---- moments --------------------------------------------------------------

  m.def(
      "distributed_sum",
      [](std::vector<Vector> vectors, const FunctionSpec& f, double eps,
         std::uint64_t seed) {
        const SumResult res = distributed_sum(make_vectors(std::move(vectors)), f, eps, seed);
        py::dict d = moment_result_dict(res.estimate, res.ledger);
        d["samples"] = res.samples;
        return d;
      },
      py::arg("vectors"), py::arg("f"), py::arg("eps"), py::arg("seed"),
      "importance-sampled estimate of sum_i f(sum_t a_ti)");

  m.def(
      "frequency_moments",
      [](std::vector<Vector> vectors, int k, double eps, std::uint64_t seed) {
        const FreqResult res = frequency_moments(make_vectors(std::move(vectors)), k, eps, seed);
        py::dict d = moment_result_dict(res.estimate, res.ledger);
        d["phase"] = res.phase;
        return d;
      },
      py::arg("vectors"), py::arg("k"), py::arg("eps"), py::arg("seed"),
      "two-phase frequency moment estimator for f = x^k, k >= 2");

  m.def(
      "lipschitz_moments",
      [](std::vector<Vector> vectors, const FunctionSpec& f, double eps,
         std::uint64_t seed) {
        const FreqResult res = lipschitz_moments(make_vectors(std::move(vectors)), f, eps, seed);
        py::dict d = moment_result_dict(res.estimate, res.ledger);
        d["phase"] = res.phase;
        return d;
      },
      py::arg("vectors"), py::arg("f"), py::arg("eps"), py::arg("seed"),
      "frequency engine for Lipschitz f with declared order >= 4");

  m.def(
      "generalized_moment",
      [](std::vector<Matrix> banks, const FunctionSpec& f, int k, double eps,
         std::uint64_t seed) {
        const SumResult res =
            generalized_moment(make_tuples(std::move(banks)), f, product_g(), k, eps, seed);
        py::dict d = moment_result_dict(res.estimate, res.ledger);
        d["samples"] = res.samples;
        return d;
      },
      py::arg("banks"), py::arg("f"), py::arg("k"), py::arg("eps"), py::arg("seed"),
      "correlation over ordered distinct k-tuples with g = product");

  m.def(
      "exact_moment",
      [](std::vector<Vector> vectors, const FunctionSpec& f) {
        return exact_moment(make_vectors(std::move(vectors)), f);
      },
      py::arg("vectors"), py::arg("f"));
  m.def(
      "exact_frequency_moment",
      [](std::vector<Vector> vectors, int k) {
        return exact_frequency_moment(make_vectors(std::move(vectors)), k);
      },
      py::arg("vectors"), py::arg("k"));
  m.def(
      "exact_generalized_moment",
      [](std::vector<Matrix> banks, const FunctionSpec& f, int k) {
        return exact_generalized_moment(make_tuples(std::move(banks)), f, product_g(), k);
      },
      py::arg("banks"), py::arg("f"), py::arg("k"));

  // ---- samplers --------------------------------------------------------------

  m.def(
      "two_level_draws",
      [](std::vector<Vector> vectors, const FunctionSpec& f, std::int64_t count,
         std::uint64_t seed) {
        return two_level_draws(make_vectors(std::move(vectors)), f, count, seed);
      },
      py::arg("vectors"), py::arg("f"), py::arg("count"), py::arg("seed"),
      "(server, index) draws whose index marginal is B_i / B");

  m.def(
      "rejection_sample_tuples",
      [](const Matrix& bank, const FunctionSpec& f, int k, std::int64_t count,
         std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::vector<std::int64_t>> out;
        for (std::int64_t c = 0; c < count; ++c) {
          const auto s = rejection_sample_tuple(bank, f, product_g(), k, rng);
          if (s) out.push_back(s->tuple);
        }
        return out;
      },
      py::arg("bank"), py::arg("f"), py::arg("k"), py::arg("count"), py::arg("seed"),
      "exact f-weighted tuple draws over ordered distinct k-tuples, g = product");
}
