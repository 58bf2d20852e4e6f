// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "augflat/flatness.hpp"
#include "augflat/numerics.hpp"
#include "helpers.hpp"

using namespace augflat;
using test::dense_arch;

namespace {

flatness::RiskSurface constant_surface(Eigen::Index dim, double c) {
  flatness::RiskSurface s;
  s.dim = dim;
  s.value = [c](const Eigen::VectorXd&) { return c; };
  s.grad = [dim](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim); };
  return s;
}

flatness::RiskSurface quadratic_surface(Eigen::Index dim, double a) {
  flatness::RiskSurface s;
  s.dim = dim;
  s.value = [a](const Eigen::VectorXd& t) { return a * t.squaredNorm(); };
  s.grad = [a](const Eigen::VectorXd& t) { return (2.0 * a * t).eval(); };
  return s;
}

flatness::RiskSurface affine_surface(const Eigen::VectorXd& slope, double offset) {
  flatness::RiskSurface s;
  s.dim = slope.size();
  s.value = [slope, offset](const Eigen::VectorXd& t) { return slope.dot(t) + offset; };
  s.grad = [slope](const Eigen::VectorXd&) { return slope; };
  return s;
}

// 1-D plateau of half-width w: zero loss on [-w, w], unit slope outside.
flatness::RiskSurface plateau_surface(double w) {
  flatness::RiskSurface s;
  s.dim = 1;
  s.value = [w](const Eigen::VectorXd& t) { return std::max(0.0, std::abs(t[0]) - w); };
  s.grad = [w](const Eigen::VectorXd& t) {
    Eigen::VectorXd g(1);
    g[0] = std::abs(t[0]) <= w ? 0.0 : (t[0] > 0.0 ? 1.0 : -1.0);
    return g;
  };
  return s;
}

}  // namespace

TEST_CASE("constant risk saturates the noise search at its upper end") {
  flatness::FlatnessConfig cfg;
  cfg.seed = 3;
  flatness::RiskSurface s = constant_surface(4, 0.7);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);

  flatness::PacBayesResult pac = flatness::pac_bayes_mu(s, theta, cfg);
  CHECK(pac.saturated == 1);
  CHECK(pac.sigma_star == cfg.search.hi);
  CHECK(pac.mu == doctest::Approx(1.0 / cfg.search.hi).epsilon(1e-12));

  flatness::LpfResult l = flatness::lpf(s, theta, cfg);
  CHECK(l.value == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(l.mc_stderr == doctest::Approx(0.0));

  CHECK(flatness::eps_sharpness(s, theta, cfg).value == 0.0);

  flatness::BFlatResult b = flatness::b_flat_radius(s, theta, cfg);
  CHECK(b.saturated == 1);
  CHECK(b.b_hat == cfg.search.hi);
}

TEST_CASE("quadratic risk matches the gaussian closed forms") {
  const Eigen::Index p = 8;
  const double a = 0.5;
  flatness::RiskSurface s = quadratic_surface(p, a);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);

  flatness::FlatnessConfig cfg;
  cfg.seed = 5;
  cfg.mc_samples = 500;

  // E[risk(sigma z)] = a sigma^2 p, so the tau-feasible scale is
  // sqrt(tau / (a p)).
  flatness::PacBayesResult pac = flatness::pac_bayes_mu(s, theta, cfg);
  double sigma_star = std::sqrt(cfg.tau / (a * static_cast<double>(p)));
  CHECK(pac.saturated == 0);
  CHECK(std::abs(pac.sigma_star - sigma_star) / sigma_star <= 0.05);
  CHECK(std::abs(pac.mu - 1.0 / sigma_star) / (1.0 / sigma_star) <= 0.05);

  flatness::LpfResult l = flatness::lpf(s, theta, cfg);
  double expected = a * cfg.sigma_lpf * cfg.sigma_lpf * static_cast<double>(p);
  CHECK(std::abs(l.value - expected) <= 3.0 * l.mc_stderr);

  flatness::BFlatResult b = flatness::b_flat_radius(s, theta, cfg);
  double b_star = std::sqrt(cfg.tol_b / a);
  CHECK(b.saturated == 0);
  CHECK(std::abs(b.b_hat - b_star) / b_star <= 0.10);
}

TEST_CASE("one-dimensional sharpness finds the boundary maximizer") {
  const double a = 2.0, theta0 = 0.8;
  flatness::RiskSurface s = quadratic_surface(1, a);
  Eigen::VectorXd theta(1);
  theta << theta0;
  flatness::FlatnessConfig cfg;
  cfg.seed = 7;
  double rho = cfg.rho_sharp;
  double exact =
      100.0 * a * ((theta0 + rho) * (theta0 + rho) - theta0 * theta0) / (1.0 + a * theta0 * theta0);
  flatness::SharpnessResult r = flatness::eps_sharpness(s, theta, cfg);
  CHECK(std::abs(r.value - exact) / exact <= 0.01);
}

TEST_CASE("plateau half-width is recovered by the radius search") {
  const double w = 0.5;
  flatness::RiskSurface s = plateau_surface(w);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  flatness::FlatnessConfig cfg;
  cfg.seed = 9;
  flatness::BFlatResult b = flatness::b_flat_radius(s, theta, cfg);
  CHECK(std::abs(b.b_hat - w) / w <= 0.10);
}

TEST_CASE("affine risk is its own gaussian smoothing") {
  Rng rng(11);
  Eigen::VectorXd slope = rng.normal_vector(6);
  flatness::RiskSurface s = affine_surface(slope, 2.0);
  Eigen::VectorXd theta = rng.normal_vector(6);
  flatness::FlatnessConfig cfg;
  cfg.seed = 12;
  cfg.mc_samples = 400;
  flatness::LpfResult l = flatness::lpf(s, theta, cfg);
  CHECK(std::abs(l.value - s.value(theta)) <= 3.0 * l.mc_stderr);
}

TEST_CASE("doubling tau never shrinks the feasible noise scale") {
  flatness::RiskSurface s = quadratic_surface(4, 1.3);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  flatness::FlatnessConfig cfg;
  cfg.seed = 13;
  cfg.mc_samples = 200;
  double sigma1 = flatness::pac_bayes_mu(s, theta, cfg).sigma_star;
  cfg.tau *= 2.0;
  double sigma2 = flatness::pac_bayes_mu(s, theta, cfg).sigma_star;
  CHECK(sigma2 >= sigma1);
}

TEST_CASE("sharpness grows with its search radius") {
  flatness::RiskSurface s = quadratic_surface(3, 0.9);
  Rng rng(14);
  Eigen::VectorXd theta = rng.normal_vector(3);
  flatness::FlatnessConfig cfg;
  cfg.seed = 15;
  double v1 = flatness::eps_sharpness(s, theta, cfg).value;
  cfg.rho_sharp *= 2.0;
  double v2 = flatness::eps_sharpness(s, theta, cfg).value;
  CHECK(v2 >= v1);
}

TEST_CASE("sharp quadratics saturate the noise search at its lower end") {
  flatness::RiskSurface s = quadratic_surface(1, 1e12);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  flatness::FlatnessConfig cfg;
  cfg.seed = 16;
  flatness::PacBayesResult pac = flatness::pac_bayes_mu(s, theta, cfg);
  CHECK(pac.saturated == -1);
  CHECK(pac.sigma_star == cfg.search.lo);
}

TEST_CASE("flatness metrics are deterministic in the seed") {
  flatness::RiskSurface s = quadratic_surface(5, 0.4);
  Rng rng(17);
  Eigen::VectorXd theta = rng.normal_vector(5) * 0.1;
  flatness::FlatnessConfig cfg;
  cfg.seed = 18;
  flatness::FlatnessReport a = flatness::evaluate(s, theta, cfg);
  flatness::FlatnessReport b = flatness::evaluate(s, theta, cfg);
  CHECK(a.pac.mu == b.pac.mu);
  CHECK(a.lpf.value == b.lpf.value);
  CHECK(a.sharp.value == b.sharp.value);
  CHECK(a.bflat.b_hat == b.bflat.b_hat);
}

TEST_CASE("model surfaces agree with direct model evaluation") {
  nnet::Model m(dense_arch(3, {{4, nnet::Activation::Tanh}, {2, nnet::Activation::Identity}}));
  Eigen::VectorXd params = m.init_params(19);
  nnet::Dataset d = test::random_dataset(8, 3, 2, 20);
  flatness::RiskSurface s = flatness::model_surface(m, d, nnet::LossKind::CrossEntropy);
  CHECK(s.dim == m.param_count());
  CHECK(s.value(params) ==
        doctest::Approx(nnet::dataset_risk(m, params, d, nnet::LossKind::CrossEntropy))
            .epsilon(1e-12));
  Eigen::VectorXd g = s.grad(params);
  Eigen::VectorXd fd = test::fd_gradient([&](const Eigen::VectorXd& p) { return s.value(p); },
                                         params);
  CHECK((g - fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()) <= 1e-5);

  flatness::FlatnessConfig cfg;
  cfg.seed = 21;
  cfg.mc_samples = 10;
  flatness::FlatnessReport via_surface = flatness::evaluate(s, params, cfg);
  flatness::FlatnessReport via_model =
      flatness::evaluate(m, params, d, cfg, nnet::LossKind::CrossEntropy);
  CHECK(via_surface.pac.mu == via_model.pac.mu);
  CHECK(via_surface.lpf.value == via_model.lpf.value);
  CHECK(via_surface.sharp.value == via_model.sharp.value);
  CHECK(via_surface.bflat.b_hat == via_model.bflat.b_hat);
}

TEST_CASE("presets carry the documented budgets") {
  flatness::FlatnessConfig cifar = flatness::cifar_preset();
  CHECK(cifar.tau == 0.05);
  CHECK(cifar.sigma_lpf == 0.01);
  CHECK(cifar.rho_sharp == 0.1);
  flatness::FlatnessConfig inet = flatness::inet_preset();
  CHECK(inet.tau == 0.35);
  CHECK(inet.rho_sharp == 1.0);
  CHECK_NOTHROW(flatness::validate(cifar));
  CHECK_NOTHROW(flatness::validate(inet));

  flatness::FlatnessConfig bad = cifar;
  bad.tau = 0.0;
  CHECK_THROWS(flatness::validate(bad));
  bad = cifar;
  bad.search.lo = bad.search.hi;
  CHECK_THROWS(flatness::validate(bad));
}
