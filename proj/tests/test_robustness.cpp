// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "augflat/harness.hpp"
#include "augflat/robustness.hpp"
#include "helpers.hpp"

using namespace augflat;
using namespace augflat::test;
using robustness::AttackConfig;
using robustness::AttackNorm;
using robustness::CorruptionKind;
using robustness::CorruptionSpec;

namespace {

const nnet::ImageGeom kNoGeom{};

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

// Params for a bias-free dense layer are vec(W) in row-major order.
Eigen::VectorXd params_from_matrix(const Eigen::MatrixXd& w) {
  Eigen::VectorXd p(w.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      p.data(), w.rows(), w.cols()) = w;
  return p;
}

Eigen::VectorXd constant_image(Eigen::Index n, double v) {
  return Eigen::VectorXd::Constant(n, v);
}

Eigen::VectorXd random_image(Eigen::Index n, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.uniform(lo, hi);
  return x;
}

double sample_sd(const Eigen::VectorXd& v) {
  double mu = v.mean();
  return std::sqrt((v.array() - mu).square().sum() / static_cast<double>(v.size() - 1));
}

// Axis-difference classifier on [0,1]^2: class 1 iff x0 > x1, margin 2|x0 - x1|
// in logit units. The CE input gradient keeps a fixed sign pattern along the
// attack path, so saturated max-norm PGD lands exactly at x + eps * sign(w).
struct AxisPair {
  nnet::Model model{linear_arch(2, 2)};
  Eigen::VectorXd params;
  AxisPair() {
    Eigen::MatrixXd w(2, 2);
    w << -3.0, 3.0, 3.0, -3.0;
    params = params_from_matrix(w);
  }
};

nnet::Dataset axis_dataset(const std::vector<std::pair<double, double>>& pts) {
  nnet::Dataset d;
  d.name = "axis";
  d.input_dim = 2;
  d.num_classes = 2;
  for (auto [a, b] : pts) {
    nnet::Sample s;
    s.x.resize(2);
    s.x << a, b;
    s.y = a > b ? 1 : 0;
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST_CASE("attack presets carry the published budgets") {
  AttackConfig c = robustness::attack_preset("cifar-l2");
  CHECK(c.norm == AttackNorm::L2);
  CHECK(c.eps == doctest::Approx(0.5));
  CHECK(c.alpha == doctest::Approx(0.0125));
  CHECK(c.steps == 20);
  CHECK_FALSE(c.random_start);
  CHECK(c.name == "cifar-l2");

  c = robustness::attack_preset("cifar-linf");
  CHECK(c.norm == AttackNorm::Linf);
  CHECK(c.eps == doctest::Approx(8.0 / 255.0));
  CHECK(c.alpha == doctest::Approx(2.0 / 255.0));
  CHECK(c.steps == 7);
  CHECK(c.random_start);

  c = robustness::attack_preset("tinyinet-l2");
  CHECK(c.eps == doctest::Approx(0.25));
  CHECK(c.steps == 10);

  c = robustness::attack_preset("inet-linf");
  CHECK(c.eps == doctest::Approx(2.0 / 255.0));
  CHECK(c.alpha == doctest::Approx(1.0 / 255.0));
  CHECK(c.steps == 2);

  CHECK(robustness::attack_preset_names().size() == 6);
  for (const std::string& name : robustness::attack_preset_names())
    CHECK(robustness::attack_preset(name).name == name);
  CHECK_THROWS_AS(robustness::attack_preset("cifar-l3"), std::invalid_argument);
}

TEST_CASE("attack validation rejects non-positive budgets") {
  AttackConfig c = robustness::attack_preset("cifar-l2");
  c.eps = 0.0;
  CHECK_THROWS_AS(robustness::validate(c), std::invalid_argument);
  c = robustness::attack_preset("cifar-l2");
  c.alpha = -0.1;
  CHECK_THROWS_AS(robustness::validate(c), std::invalid_argument);
  c = robustness::attack_preset("cifar-l2");
  c.steps = -1;
  CHECK_THROWS_AS(robustness::validate(c), std::invalid_argument);
}

TEST_CASE("zero-step attack returns the clean input unchanged") {
  nnet::Model m(dense_arch(6, {{5, nnet::Activation::Tanh}, {3, nnet::Activation::Identity}}));
  Eigen::VectorXd params = m.init_params(7);
  Eigen::VectorXd x = random_image(6, 11);

  for (bool rs : {false, true}) {
    AttackConfig cfg;
    cfg.norm = AttackNorm::L2;
    cfg.eps = 0.5;
    cfg.alpha = 0.1;
    cfg.steps = 0;
    cfg.random_start = rs;
    Eigen::VectorXd xa = pgd_attack(m, params, x, 1, cfg, nnet::PixelScale::Unit, 3);
    CHECK(std::memcmp(xa.data(), x.data(), sizeof(double) * x.size()) == 0);
  }
}

TEST_CASE("attack rejects inputs outside the pixel box") {
  nnet::Model m(linear_arch(2, 2));
  Eigen::VectorXd params = m.init_params(1);
  AttackConfig cfg = robustness::attack_preset("cifar-linf");
  Eigen::VectorXd x(2);
  x << -0.5, 0.5;
  CHECK_THROWS_AS(pgd_attack(m, params, x, 0, cfg, nnet::PixelScale::Unit, 0),
                  std::invalid_argument);
}

TEST_CASE("one-step max-norm attack on a linear model matches the closed form") {
  nnet::Model m(linear_arch(3, 2));
  Eigen::MatrixXd w(2, 3);
  w << 0.8, -1.1, 0.4, -0.3, 0.9, 1.2;
  Eigen::VectorXd params = params_from_matrix(w);

  Eigen::VectorXd x(3);
  x << 0.5, 0.4, 0.6;
  const int y = 0;

  AttackConfig cfg;
  cfg.norm = AttackNorm::Linf;
  cfg.eps = 0.02;
  cfg.alpha = 0.01;
  cfg.steps = 1;
  cfg.random_start = false;

  Eigen::VectorXd p = softmax(w * x);
  Eigen::VectorXd err = p;
  err(y) -= 1.0;
  Eigen::VectorXd g = w.transpose() * err;
  REQUIRE(g.cwiseAbs().minCoeff() > 1e-6);
  Eigen::VectorXd want = x + cfg.alpha * g.cwiseSign();

  Eigen::VectorXd xa = pgd_attack(m, params, x, y, cfg, nnet::PixelScale::Unit, 0);
  CHECK((xa - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("saturated max-norm attack lands on the budget boundary") {
  AxisPair ap;
  Eigen::VectorXd x(2);
  x << 0.35, 0.65;
  const int y = 0;  // x0 < x1

  AttackConfig cfg;
  cfg.norm = AttackNorm::Linf;
  cfg.eps = 0.05;
  cfg.alpha = 0.02;
  cfg.steps = 10;  // steps * alpha well past eps
  cfg.random_start = false;

  // Attacking class 0 pushes along w = W.row(1) - W.row(0), sign (+, -).
  Eigen::VectorXd want(2);
  want << x(0) + cfg.eps, x(1) - cfg.eps;

  Eigen::VectorXd xa = pgd_attack(ap.model, ap.params, x, y, cfg, nnet::PixelScale::Unit, 0);
  CHECK((xa - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attacked points always satisfy the feasibility predicate") {
  nnet::Model m(dense_arch(12, {{8, nnet::Activation::Tanh}, {3, nnet::Activation::Identity}}));
  Eigen::VectorXd params = m.init_params(5);
  nnet::Dataset d = random_dataset(20, 12, 3, 17, 0.0, 1.0);

  for (AttackNorm norm : {AttackNorm::L2, AttackNorm::Linf}) {
    AttackConfig cfg;
    cfg.norm = norm;
    cfg.eps = norm == AttackNorm::L2 ? 0.4 : 0.06;
    cfg.alpha = cfg.eps / 4.0;
    cfg.steps = 5;
    cfg.random_start = true;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const nnet::Sample& s = d.samples[static_cast<size_t>(i)];
      Eigen::VectorXd xa =
          pgd_attack(m, params, s.x, s.y, cfg, d.scale, seed_mix(99, static_cast<uint64_t>(i)));
      CHECK(robustness::attack_feasible(s.x, xa, cfg, d.scale));
      CHECK(xa.minCoeff() >= -1e-9);
      CHECK(xa.maxCoeff() <= 1.0 + 1e-9);
      double dist = norm == AttackNorm::L2 ? (xa - s.x).norm()
                                           : (xa - s.x).lpNorm<Eigen::Infinity>();
      CHECK(dist <= cfg.eps + 1e-9);
    }
  }
}

TEST_CASE("the attack never returns a point with lower loss than the clean input") {
  nnet::Model m(dense_arch(10, {{6, nnet::Activation::Tanh}, {4, nnet::Activation::Identity}}));
  Eigen::VectorXd params = m.init_params(23);
  nnet::Dataset d = random_dataset(30, 10, 4, 29, 0.0, 1.0);

  AttackConfig cfg;
  cfg.norm = AttackNorm::L2;
  cfg.eps = 0.3;
  cfg.alpha = 0.1;
  cfg.steps = 6;
  cfg.random_start = true;

  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const nnet::Sample& s = d.samples[static_cast<size_t>(i)];
    Eigen::VectorXd xa =
        pgd_attack(m, params, s.x, s.y, cfg, d.scale, seed_mix(7, static_cast<uint64_t>(i)));
    double clean = nnet::sample_loss(nnet::forward(m, params, s.x), s.y, nnet::LossKind::CrossEntropy);
    double adv = nnet::sample_loss(nnet::forward(m, params, xa), s.y, nnet::LossKind::CrossEntropy);
    CHECK(adv >= clean - 1e-12);
  }
}

TEST_CASE("zero-step attack error equals clean error") {
  AxisPair ap;
  nnet::Dataset d = axis_dataset({{0.2, 0.8}, {0.8, 0.2}, {0.45, 0.55}, {0.6, 0.4}});

  AttackConfig cfg;
  cfg.norm = AttackNorm::Linf;
  cfg.eps = 0.3;
  cfg.alpha = 0.1;
  cfg.steps = 0;
  double adv = robustness::adversarial_error(ap.model, ap.params, d, cfg, 0);
  CHECK(adv == nnet::dataset_error(ap.model, ap.params, d));
}

TEST_CASE("budgets below the margin leave the error at zero, above flip every point") {
  AxisPair ap;
  nnet::Dataset d = axis_dataset({{0.2, 0.8}, {0.8, 0.2}});
  REQUIRE(nnet::dataset_error(ap.model, ap.params, d) == 0.0);

  AttackConfig cfg;
  cfg.norm = AttackNorm::Linf;
  cfg.alpha = 0.05;
  cfg.steps = 12;
  cfg.random_start = false;

  // Boundary is x0 = x1; each point sits 0.3 away per coordinate.
  cfg.eps = 0.1;
  CHECK(robustness::adversarial_error(ap.model, ap.params, d, cfg, 1) == 0.0);
  cfg.eps = 0.4;
  CHECK(robustness::adversarial_error(ap.model, ap.params, d, cfg, 1) == 100.0);
}

TEST_CASE("attack error is nondecreasing in the budget") {
  AxisPair ap;
  Rng rng(41);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 60; ++i) pts.emplace_back(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
  nnet::Dataset d = axis_dataset(pts);

  AttackConfig cfg;
  cfg.norm = AttackNorm::Linf;
  cfg.steps = 10;
  cfg.random_start = false;

  double prev = -1.0;
  for (double eps : {0.01, 0.05, 0.15, 0.3}) {
    cfg.eps = eps;
    cfg.alpha = eps / 4.0;
    double err = robustness::adversarial_error(ap.model, ap.params, d, cfg, 2);
    CHECK(err >= prev);
    prev = err;
  }
}

TEST_CASE("noise corruptions track the severity tables") {
  const nnet::ImageGeom geom{100, 100, 1};
  const Eigen::Index n = geom.size();
  const auto& tab = robustness::severity_tables();
  Eigen::VectorXd x = constant_image(n, 0.5);

  for (int sev : {1, 5}) {
    Eigen::VectorXd out =
        robustness::corrupt(x, {CorruptionKind::GaussianNoise, sev}, geom, nnet::PixelScale::Unit, 3);
    double sd = sample_sd(out - x);
    CHECK(sd == doctest::Approx(tab.gaussian_sigma[sev - 1]).epsilon(0.10));
  }

  // Byte-scale amplitudes pick up the 255 factor.
  Eigen::VectorXd xb = constant_image(n, 127.0);
  Eigen::VectorXd outb =
      robustness::corrupt(xb, {CorruptionKind::GaussianNoise, 1}, geom, nnet::PixelScale::Byte, 3);
  CHECK(sample_sd(outb - xb) == doctest::Approx(255.0 * tab.gaussian_sigma[0]).epsilon(0.10));

  // Impulse flips pixels to 0 or 1 at the table fraction.
  for (int sev : {3, 5}) {
    Eigen::VectorXd out =
        robustness::corrupt(x, {CorruptionKind::ImpulseNoise, sev}, geom, nnet::PixelScale::Unit, 5);
    int changed = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (out(i) != x(i)) {
        ++changed;
        CHECK((out(i) == 0.0 || out(i) == 1.0));
      }
    double frac = static_cast<double>(changed) / static_cast<double>(n);
    CHECK(frac == doctest::Approx(tab.impulse_frac[sev - 1]).epsilon(0.15));
  }

  // Shot noise is mean-preserving with variance x * hi / rate.
  Eigen::VectorXd out =
      robustness::corrupt(x, {CorruptionKind::ShotNoise, 1}, geom, nnet::PixelScale::Unit, 7);
  CHECK(out.mean() == doctest::Approx(0.5).epsilon(0.04));
  CHECK(sample_sd(out) == doctest::Approx(std::sqrt(0.5 / tab.shot_rate[0])).epsilon(0.10));
}

TEST_CASE("contrast and brightness act affinely on pixels") {
  const nnet::ImageGeom geom{4, 4, 1};
  const auto& tab = robustness::severity_tables();

  Eigen::VectorXd flat = constant_image(geom.size(), 0.37);
  Eigen::VectorXd out =
      robustness::corrupt(flat, {CorruptionKind::Contrast, 5}, geom, nnet::PixelScale::Unit, 0);
  CHECK((out - flat).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::VectorXd x = random_image(geom.size(), 13, 0.2, 0.8);
  out = robustness::corrupt(x, {CorruptionKind::Contrast, 5}, geom, nnet::PixelScale::Unit, 0);
  double mu = x.mean();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    CHECK(out(i) == doctest::Approx(mu + tab.contrast_gain[4] * (x(i) - mu)).epsilon(1e-12));

  Eigen::VectorXd dim = constant_image(geom.size(), 0.2);
  out = robustness::corrupt(dim, {CorruptionKind::Brightness, 2}, geom, nnet::PixelScale::Unit, 0);
  CHECK(out(0) == doctest::Approx(0.2 + tab.brightness_shift[1]).epsilon(1e-12));

  Eigen::VectorXd bright = constant_image(geom.size(), 0.95);
  out = robustness::corrupt(bright, {CorruptionKind::Brightness, 5}, geom, nnet::PixelScale::Unit, 0);
  CHECK(out.maxCoeff() == 1.0);
  CHECK(out.minCoeff() == 1.0);
}

TEST_CASE("blur preserves flat images and shrinks variation") {
  const nnet::ImageGeom geom{12, 12, 1};
  Eigen::VectorXd flat = constant_image(geom.size(), 0.7);
  Eigen::VectorXd out =
      robustness::corrupt(flat, {CorruptionKind::GaussianBlur, 3}, geom, nnet::PixelScale::Unit, 0);
  CHECK((out - flat).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::VectorXd x = random_image(geom.size(), 31);
  for (int sev = 1; sev <= 5; ++sev) {
    out = robustness::corrupt(x, {CorruptionKind::GaussianBlur, sev}, geom, nnet::PixelScale::Unit, 0);
    CHECK(sample_sd(out) < sample_sd(x));
  }
}

TEST_CASE("pixelate replaces each block with its mean") {
  const nnet::ImageGeom geom{8, 8, 1};
  Eigen::VectorXd x = random_image(geom.size(), 47);
  const auto& tab = robustness::severity_tables();
  const int block = static_cast<int>(std::ceil(8 * tab.pixelate_frac[4]));  // severity 5

  Eigen::VectorXd out =
      robustness::corrupt(x, {CorruptionKind::Pixelate, 5}, geom, nnet::PixelScale::Unit, 0);
  for (int by = 0; by < geom.h; by += block)
    for (int bx = 0; bx < geom.w; bx += block) {
      int ye = std::min(geom.h, by + block), xe = std::min(geom.w, bx + block);
      double acc = 0.0;
      for (int y = by; y < ye; ++y)
        for (int xx = bx; xx < xe; ++xx) acc += x(y * geom.w + xx);
      double mean = acc / ((ye - by) * (xe - bx));
      for (int y = by; y < ye; ++y)
        for (int xx = bx; xx < xe; ++xx) CHECK(out(y * geom.w + xx) == doctest::Approx(mean).epsilon(1e-12));
    }

  Eigen::VectorXd twice =
      robustness::corrupt(out, {CorruptionKind::Pixelate, 5}, geom, nnet::PixelScale::Unit, 0);
  CHECK((twice - out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("all corruptions stay inside the pixel box") {
  const nnet::ImageGeom geom{10, 10, 3};
  Eigen::VectorXd x = random_image(geom.size(), 53);
  for (CorruptionKind kind : robustness::all_corruptions())
    for (int sev = 1; sev <= robustness::kSeverityLevels; ++sev) {
      Eigen::VectorXd out = robustness::corrupt(x, {kind, sev}, geom, nnet::PixelScale::Unit, 61);
      CHECK(out.minCoeff() >= 0.0);
      CHECK(out.maxCoeff() <= 1.0);
    }
}

TEST_CASE("geometry-bound corruptions reject flat data") {
  Eigen::VectorXd x = constant_image(9, 0.5);
  CHECK_THROWS_WITH_AS(
      robustness::corrupt(x, {CorruptionKind::GaussianBlur, 1}, kNoGeom, nnet::PixelScale::Unit, 0),
      doctest::Contains("requires image-shaped data"), std::invalid_argument);
  CHECK_THROWS_AS(
      robustness::corrupt(x, {CorruptionKind::Pixelate, 1}, kNoGeom, nnet::PixelScale::Unit, 0),
      std::invalid_argument);

  const nnet::ImageGeom geom{3, 3, 1};
  CHECK_THROWS_AS(
      robustness::corrupt(x, {CorruptionKind::GaussianNoise, 0}, geom, nnet::PixelScale::Unit, 0),
      std::invalid_argument);
  CHECK_THROWS_AS(
      robustness::corrupt(x, {CorruptionKind::GaussianNoise, 6}, geom, nnet::PixelScale::Unit, 0),
      std::invalid_argument);
}

TEST_CASE("corrupted dataset copies are named, deterministic, and label-preserving") {
  nnet::Dataset d = harness::make_synthetic(harness::MiniImages{4, 24}, 11);
  CorruptionSpec spec{CorruptionKind::GaussianNoise, 3};

  nnet::Dataset a = robustness::corrupt_dataset(d, spec, 42);
  nnet::Dataset b = robustness::corrupt_dataset(d, spec, 42);
  nnet::Dataset c = robustness::corrupt_dataset(d, spec, 43);

  CHECK(a.name == d.name + "+gaussian_noise@3");
  CHECK(a.geom.h == d.geom.h);
  CHECK(a.size() == d.size());
  bool identical = true, moved = false, labels_ok = true;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const auto& sa = a.samples[static_cast<size_t>(i)];
    if (std::memcmp(sa.x.data(), b.samples[static_cast<size_t>(i)].x.data(),
                    sizeof(double) * static_cast<size_t>(sa.x.size())) != 0)
      identical = false;
    if ((sa.x - c.samples[static_cast<size_t>(i)].x).cwiseAbs().maxCoeff() > 0.0) moved = true;
    if (sa.y != d.samples[static_cast<size_t>(i)].y) labels_ok = false;
  }
  CHECK(identical);
  CHECK(moved);
  CHECK(labels_ok);
}

TEST_CASE("grid mean averages cells uniformly") {
  std::vector<robustness::CorruptionCell> grid;
  int i = 0;
  for (double e : {10.0, 20.0, 30.0, 40.0})
    grid.push_back({CorruptionKind::GaussianNoise, ++i, e});
  CHECK(robustness::grid_mean(grid) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK_THROWS_AS(robustness::grid_mean({}), std::invalid_argument);
}

TEST_CASE("corruption error grid matches per-cell recomputation") {
  nnet::Dataset d = harness::make_synthetic(harness::MiniImages{3, 30}, 5);
  nnet::Model m(dense_arch(static_cast<int>(d.input_dim),
                           {{8, nnet::Activation::Tanh}, {3, nnet::Activation::Identity}}));
  Eigen::VectorXd params = m.init_params(9);

  std::vector<CorruptionKind> kinds = {CorruptionKind::GaussianNoise, CorruptionKind::Contrast};
  std::vector<int> sevs = {1, 4};
  robustness::RobustnessReport rep = robustness::mce(m, params, d, kinds, sevs, 77);

  CHECK(rep.grid.size() == kinds.size() * sevs.size());
  CHECK(rep.clean_error == nnet::dataset_error(m, params, d));
  for (const auto& cell : rep.grid) {
    nnet::Dataset corrupted = robustness::corrupt_dataset(d, {cell.kind, cell.severity}, 77);
    CHECK(cell.error == nnet::dataset_error(m, params, corrupted));
  }
  CHECK(rep.mce == doctest::Approx(robustness::grid_mean(rep.grid)).epsilon(1e-12));

  CHECK_THROWS_AS(robustness::mce(m, params, d, {}, sevs, 0), std::invalid_argument);
}

TEST_CASE("corruption names round-trip") {
  for (CorruptionKind kind : robustness::all_corruptions())
    CHECK(robustness::corruption_from_string(robustness::to_string(kind)) == kind);
  CHECK(robustness::all_corruptions().size() == 7);
  CHECK_THROWS_AS(robustness::corruption_from_string("fog"), std::invalid_argument);
}
