/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include "distsketch/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace distsketch {

namespace {

// Flip each column so its largest-magnitude entry (first on ties) is positive.
void canonicalize_columns(Matrix& v) {
  for (Index c = 0; c < v.cols(); ++c) {
    Index arg = 0;
    double best = -1.0;
    for (Index r = 0; r < v.rows(); ++r) {
      const double a = std::abs(v(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (v(arg, c) < 0.0) v.col(c) = -v.col(c);
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite values");
}

}  // namespace

Matrix top_right_singular_vectors(const Matrix& m, Index k) {
  if (k < 1 || k > std::min(m.rows(), m.cols()))
    throw std::invalid_argument("top_right_singular_vectors: k out of range");
  require_finite(m, "top_right_singular_vectors");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
  Matrix v = svd.matrixV().leftCols(k);
  canonicalize_columns(v);
  return v;
}

Matrix orthonormal_row_basis(const Matrix& m) {
  require_finite(m, "orthonormal_row_basis");
  const double tol = 1e-10 * m.norm();
  if (tol == 0.0) return Matrix(0, m.cols());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
  Index r = 0;
  while (r < svd.singularValues().size() && svd.singularValues()(r) > tol) ++r;
  Matrix basis = svd.matrixV().leftCols(r);
  canonicalize_columns(basis);
  return basis.transpose();
}

double best_rank_k_error(const Matrix& m, Index k) {
  if (k < 0 || k > std::min(m.rows(), m.cols()))
    throw std::invalid_argument("best_rank_k_error: k out of range");
  require_finite(m, "best_rank_k_error");
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  // Tail sum smallest-first keeps the accumulation well conditioned.
  double acc = 0.0;
  for (Index i = sv.size() - 1; i >= k; --i) acc += sv(i) * sv(i);
  return std::sqrt(acc);
}

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("load_matrix_csv: bad value '" + cell + "' in " + path);
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size())
        throw std::runtime_error("load_matrix_csv: bad value '" + cell + "' in " + path);
      if (!std::isfinite(v))
        throw std::runtime_error("load_matrix_csv: non-finite value in " + path);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("load_matrix_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_matrix_csv: empty file " + path);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void save_matrix_csv(const std::string& path, const Matrix& m) {
  require_finite(m, "save_matrix_csv");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_matrix_csv: cannot open " + path);
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_matrix_csv: write failed for " + path);
}

Matrix load_matrix_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_matrix_bin: cannot open " + path);
  std::uint64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) throw std::runtime_error("load_matrix_bin: truncated header in " + path);
  if (dims[0] == 0 || dims[1] == 0 || dims[0] > (1ULL << 32) || dims[1] > (1ULL << 32))
    throw std::runtime_error("load_matrix_bin: implausible dims in " + path);
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1];
  std::vector<double> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("load_matrix_bin: truncated payload in " + path);
  Matrix m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = data[static_cast<std::size_t>(i) * dims[1] + static_cast<std::size_t>(j)];
      if (!std::isfinite(v)) throw std::runtime_error("load_matrix_bin: non-finite value in " + path);
      m(i, j) = v;
    }
  return m;
}

void save_matrix_bin(const std::string& path, const Matrix& m) {
  require_finite(m, "save_matrix_bin");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_matrix_bin: cannot open " + path);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                 static_cast<std::uint64_t>(m.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!out) throw std::runtime_error("save_matrix_bin: write failed for " + path);
}

}  // namespace distsketch
