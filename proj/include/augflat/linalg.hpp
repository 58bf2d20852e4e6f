// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace augflat::linalg {

// Singular values below kRankCutoff * sigma_max are treated as zero.
inline constexpr double kRankCutoff = 1e-12;

// Row cap: every matrix decomposed here is a Jacobian with one row per model
// output, so the short side stays small while the long side can be huge.
inline constexpr Eigen::Index kMaxRows = 64;
inline constexpr Eigen::Index kMaxCols = 200000;

// Column count at which svd() switches from dense Jacobi on A to forming the
// c x c Gram matrix A A^T and recovering the right vectors from it.
inline constexpr Eigen::Index kWideThreshold = 512;

// Thin decomposition A = u * sigma.asDiagonal() * v.transpose() with
// k = min(rows, cols) columns and sigma sorted descending.
struct SvdResult {
  Eigen::MatrixXd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd v;

  int rank() const;
};

struct SigmaExtrema {
  double min = 0.0;
  double max = 0.0;
  bool rank_deficient = false;
};

SvdResult svd(const Eigen::MatrixXd& a);

Eigen::MatrixXd pinv(const SvdResult& s);
Eigen::MatrixXd pinv(const Eigen::MatrixXd& a);

SigmaExtrema sigma_extrema(const Eigen::MatrixXd& a);

}  // namespace augflat::linalg
