// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>

#include "augflat/linalg.hpp"
#include "augflat/numerics.hpp"

using namespace augflat;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
  return a;
}

Eigen::MatrixXd random_rank_deficient(Eigen::Index rows, Eigen::Index cols, Eigen::Index rank,
                                      uint64_t seed) {
  return random_matrix(rows, rank, seed) * random_matrix(rank, cols, seed + 1);
}

double reconstruction_error(const Eigen::MatrixXd& a, const linalg::SvdResult& s) {
  Eigen::MatrixXd rebuilt = s.u * s.sigma.asDiagonal() * s.v.transpose();
  return (rebuilt - a).norm();
}

double orthogonality_error(const Eigen::MatrixXd& q) {
  return (q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols())).norm();
}

double power_iteration_sigma_max(const Eigen::MatrixXd& a, uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v = rng.normal_vector(a.cols());
  v.normalize();
  Eigen::MatrixXd gram = a.transpose() * a;
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Eigen::VectorXd w = gram * v;
    lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
  }
  return std::sqrt(lambda);
}

double mp_conditions_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ap) {
  Eigen::MatrixXd aap = a * ap;
  Eigen::MatrixXd apa = ap * a;
  double e1 = (aap * a - a).cwiseAbs().maxCoeff();
  double e2 = (apa * ap - ap).cwiseAbs().maxCoeff();
  double e3 = (aap - aap.transpose()).cwiseAbs().maxCoeff();
  double e4 = (apa - apa.transpose()).cwiseAbs().maxCoeff();
  return std::max({e1, e2, e3, e4});
}

}  // namespace

TEST_CASE("svd of the 2x2 identity has unit singular values") {
  linalg::SvdResult s = linalg::svd(Eigen::MatrixXd::Identity(2, 2));
  REQUIRE(s.sigma.size() == 2);
  CHECK(s.sigma[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.sigma[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd of diag(3, 0) keeps the zero singular value") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 3.0;
  linalg::SvdResult s = linalg::svd(a);
  CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.sigma[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.rank() == 1);
}

TEST_CASE("svd reconstructs a random 3x7 matrix") {
  Eigen::MatrixXd a = random_matrix(3, 7, 101);
  linalg::SvdResult s = linalg::svd(a);
  CHECK(reconstruction_error(a, s) <= 1e-10);
  CHECK(orthogonality_error(s.u) <= 1e-10);
  CHECK(orthogonality_error(s.v) <= 1e-10);
  CHECK(std::is_sorted(s.sigma.data(), s.sigma.data() + s.sigma.size(), std::greater<double>()));
  CHECK(s.sigma.minCoeff() >= 0.0);
}

TEST_CASE("svd wide-matrix path matches the dense path") {
  for (uint64_t seed : {7u, 8u, 9u}) {
    Eigen::MatrixXd a = random_matrix(4, linalg::kWideThreshold + 300, seed);
    linalg::SvdResult s = linalg::svd(a);
    CHECK(reconstruction_error(a, s) <= 1e-8 * std::max(1.0, a.norm()));
    CHECK(orthogonality_error(s.u) <= 1e-10);
    CHECK(orthogonality_error(s.v) <= 1e-10);
    Eigen::JacobiSVD<Eigen::MatrixXd> ref(a);
    for (Eigen::Index i = 0; i < s.sigma.size(); ++i)
      CHECK(s.sigma[i] == doctest::Approx(ref.singularValues()[i]).epsilon(1e-9));
  }
}

TEST_CASE("svd wide path handles rank deficiency") {
  Eigen::MatrixXd a = random_rank_deficient(6, 900, 3, 44);
  linalg::SvdResult s = linalg::svd(a);
  CHECK(s.rank() == 3);
  CHECK(reconstruction_error(a, s) <= 1e-8 * std::max(1.0, a.norm()));
  CHECK(orthogonality_error(s.v) <= 1e-9);
}

TEST_CASE("pinv of the identity is the identity") {
  Eigen::MatrixXd p = linalg::pinv(Eigen::MatrixXd::Identity(3, 3));
  CHECK((p - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);
}

TEST_CASE("pinv inverts only the nonzero singular directions") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 2.0;
  Eigen::MatrixXd p = linalg::pinv(a);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(0.0));
  CHECK(p(1, 0) == doctest::Approx(0.0));
  CHECK(p(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("pinv of a full-row-rank matrix is a right inverse") {
  Eigen::MatrixXd a = random_matrix(3, 10, 303);
  Eigen::MatrixXd p = linalg::pinv(a);
  CHECK((a * p - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("pinv satisfies the Moore-Penrose conditions on mixed shapes") {
  int checked = 0;
  for (uint64_t seed = 0; seed < 12; ++seed) {
    Eigen::Index rows = 2 + static_cast<Eigen::Index>(seed % 5);
    Eigen::Index cols = 3 + static_cast<Eigen::Index>((seed * 7) % 9);
    Eigen::MatrixXd full = random_matrix(rows, cols, 900 + seed);
    Eigen::MatrixXd deficient =
        random_rank_deficient(rows, cols, std::max<Eigen::Index>(1, std::min(rows, cols) - 1),
                              1300 + seed);
    for (const Eigen::MatrixXd& a : {full, deficient}) {
      CHECK(mp_conditions_error(a, linalg::pinv(a)) <= 1e-8);
      ++checked;
    }
  }
  CHECK(checked == 24);
}

TEST_CASE("pinv is an involution on full-rank matrices") {
  Eigen::MatrixXd a = random_matrix(4, 6, 77);
  CHECK((linalg::pinv(linalg::pinv(a)) - a).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("sigma_extrema reads off diagonal singular values") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 5.0;
  linalg::SigmaExtrema e = linalg::sigma_extrema(a);
  CHECK(e.min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.max == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_FALSE(e.rank_deficient);
}

TEST_CASE("sigma_extrema of an orthogonal matrix is (1, 1)") {
  double c = std::cos(0.7), s = std::sin(0.7);
  Eigen::MatrixXd q(2, 2);
  q << c, -s, s, c;
  linalg::SigmaExtrema e = linalg::sigma_extrema(q);
  CHECK(e.min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.max == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigma_extrema max matches power iteration") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    Eigen::MatrixXd a = random_matrix(5, 9, seed);
    linalg::SigmaExtrema e = linalg::sigma_extrema(a);
    CHECK(std::abs(e.max - power_iteration_sigma_max(a, seed + 100)) <= 1e-8);
  }
}

TEST_CASE("sigma_extrema flags numerically singular matrices") {
  Eigen::MatrixXd a = random_rank_deficient(4, 4, 2, 55);
  CHECK(linalg::sigma_extrema(a).rank_deficient);
}

TEST_CASE("spectral norm is submultiplicative on sampled pairs") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Eigen::MatrixXd a = random_matrix(4, 5, 2000 + seed);
    Eigen::MatrixXd b = random_matrix(5, 3, 3000 + seed);
    double na = linalg::sigma_extrema(a).max;
    double nb = linalg::sigma_extrema(b).max;
    double nab = linalg::sigma_extrema(a * b).max;
    CHECK(nab <= na * nb + 1e-10);
  }
}

TEST_CASE("svd factors preserve vector norms") {
  Eigen::MatrixXd a = random_matrix(6, 6, 404);
  linalg::SvdResult s = linalg::svd(a);
  Rng rng(405);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd v = rng.normal_vector(6);
    CHECK((s.u * v).norm() == doctest::Approx(v.norm()).epsilon(1e-10));
    CHECK((s.v * v).norm() == doctest::Approx(v.norm()).epsilon(1e-10));
  }
}

TEST_CASE("pairwise_sum matches sequential summation") {
  Rng rng(500);
  std::vector<double> vals;
  double seq = 0.0;
  for (int i = 0; i < 1001; ++i) {
    vals.push_back(rng.uniform(-1.0, 1.0));
    seq += vals.back();
  }
  CHECK(pairwise_sum(vals) == doctest::Approx(seq).epsilon(1e-12));
  CHECK(pairwise_mean(vals) == doctest::Approx(seq / 1001.0).epsilon(1e-12));
}
