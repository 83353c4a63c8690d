/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <Eigen/Dense>
#include <string>

namespace distsketch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Top k right singular vectors of m, ordered by decreasing singular value.
// Sign convention: the entry of largest magnitude in each column is positive
// (first such entry wins ties), so results are reproducible across runs.
// Requires 1 <= k <= min(rows, cols).
Matrix top_right_singular_vectors(const Matrix& m, Index k);

// Orthonormal basis of the row space of m, one basis vector per row, with
// numerical rank decided at tolerance 1e-10 * ||m||_F. An all-zero input
// yields the empty-basis result: a 0 x cols matrix.
Matrix orthonormal_row_basis(const Matrix& m);

// Frobenius distance from m to its best rank-k approximation:
// sqrt(sum of squared singular values past the k-th). k == min dim gives 0.
double best_rank_k_error(const Matrix& m, Index k);

// File formats. CSV: one row per line, comma separated, %.17g values.
// Binary: two 8-byte little-endian dims then row-major 8-byte doubles.
// Loaders reject ragged rows, non-finite values and malformed headers.
Matrix load_matrix_csv(const std::string& path);
void save_matrix_csv(const std::string& path, const Matrix& m);
Matrix load_matrix_bin(const std::string& path);
void save_matrix_bin(const std::string& path, const Matrix& m);

}  // namespace distsketch
