// SPDX-License-Identifier: Apache-2.0
#include "augflat/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace augflat::linalg {

namespace {

void check_shape(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) throw std::invalid_argument("svd: empty matrix");
  if (a.rows() > kMaxRows)
    throw std::invalid_argument("svd: " + std::to_string(a.rows()) + " rows exceeds cap " +
                                std::to_string(kMaxRows));
  if (a.cols() > kMaxCols)
    throw std::invalid_argument("svd: " + std::to_string(a.cols()) + " cols exceeds cap " +
                                std::to_string(kMaxCols));
  if (!a.allFinite()) throw std::invalid_argument("svd: non-finite entries");
}

// Fill columns [filled, k) of v with unit vectors orthogonal to the columns
// before them. Candidates are coordinate axes; twice-orthogonalized residuals
// with enough mass left are accepted.
void complete_orthonormal(Eigen::MatrixXd& v, Eigen::Index filled) {
  const Eigen::Index m = v.rows();
  const Eigen::Index k = v.cols();
  Eigen::Index axis = 0;
  for (Eigen::Index j = filled; j < k; ++j) {
    for (; axis < m; ++axis) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
      w(axis) = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        w -= v.leftCols(j) * (v.leftCols(j).transpose() * w);
      double n = w.norm();
      if (n > 0.5) {
        v.col(j) = w / n;
        ++axis;
        break;
      }
    }
    if (axis == m && v.col(j).norm() == 0.0)
      throw std::runtime_error("svd: failed to complete orthonormal basis");
  }
}

SvdResult svd_gram(const Eigen::MatrixXd& a) {
  const Eigen::Index c = a.rows();
  const Eigen::Index m = a.cols();
  Eigen::MatrixXd gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("svd: eigensolver failed to converge on Gram matrix");

  SvdResult r;
  r.u.resize(c, c);
  r.sigma.resize(c);
  r.v.resize(m, c);

  // Eigen returns eigenvalues ascending; emit descending. Squaring into the
  // Gram matrix halves the resolvable precision: eigenvalues below the
  // eigensolver's noise floor relative to lambda_max are indistinguishable
  // from zero and must not surface as phantom singular values.
  const double lam_max = std::max(eig.eigenvalues()(c - 1), 0.0);
  const double lam_floor = 1e-13 * lam_max;
  for (Eigen::Index i = 0; i < c; ++i) {
    double lam = eig.eigenvalues()(c - 1 - i);
    r.sigma(i) = lam > lam_floor ? std::sqrt(lam) : 0.0;
    r.u.col(i) = eig.eigenvectors().col(c - 1 - i);
  }

  double smax = r.sigma(0);
  Eigen::Index filled = 0;
  for (Eigen::Index i = 0; i < c; ++i) {
    if (r.sigma(i) > kRankCutoff * smax && r.sigma(i) > 0.0) {
      r.v.col(i) = a.transpose() * r.u.col(i) / r.sigma(i);
      ++filled;
    } else {
      break;
    }
  }
  // Gram squaring costs accuracy; one modified Gram-Schmidt pass restores
  // orthogonality of the recovered right vectors.
  for (Eigen::Index i = 0; i < filled; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) r.v.col(i) -= r.v.col(j).dot(r.v.col(i)) * r.v.col(j);
    double n = r.v.col(i).norm();
    if (n == 0.0) throw std::runtime_error("svd: degenerate right singular vector");
    r.v.col(i) /= n;
  }
  complete_orthonormal(r.v, filled);
  return r;
}

}  // namespace

int SvdResult::rank() const {
  if (sigma.size() == 0) return 0;
  double cutoff = kRankCutoff * sigma(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cutoff && sigma(i) > 0.0) ++r;
  return r;
}

SvdResult svd(const Eigen::MatrixXd& a) {
  check_shape(a);
  if (a.cols() > kWideThreshold && a.cols() > a.rows()) return svd_gram(a);

  Eigen::JacobiSVD<Eigen::MatrixXd> j(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (j.info() != Eigen::Success) throw std::runtime_error("svd: Jacobi iteration did not converge");
  SvdResult r;
  r.u = j.matrixU();
  r.sigma = j.singularValues();
  r.v = j.matrixV();
  return r;
}

Eigen::MatrixXd pinv(const SvdResult& s) {
  double cutoff = kRankCutoff * s.sigma(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.sigma.size());
  for (Eigen::Index i = 0; i < s.sigma.size(); ++i)
    if (s.sigma(i) > cutoff && s.sigma(i) > 0.0) inv(i) = 1.0 / s.sigma(i);
  return s.v * inv.asDiagonal() * s.u.transpose();
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& a) { return pinv(svd(a)); }

SigmaExtrema sigma_extrema(const Eigen::MatrixXd& a) {
  SvdResult s = svd(a);
  SigmaExtrema e;
  e.max = s.sigma(0);
  e.min = s.sigma(s.sigma.size() - 1);
  e.rank_deficient = (e.min <= kRankCutoff * std::max(e.max, 1.0));
  return e;
}

}  // namespace augflat::linalg
