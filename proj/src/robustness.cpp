// SPDX-License-Identifier: Apache-2.0
#include "augflat/robustness.hpp"

#include <cmath>
#include <stdexcept>

#include "augflat/numerics.hpp"

namespace augflat::robustness {

namespace {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void clamp_box(Eigen::VectorXd& v, double hi) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::min(hi, std::max(0.0, v(i)));
}

void project_ball(Eigen::VectorXd& v, const Eigen::VectorXd& center, const AttackConfig& cfg) {
  if (cfg.norm == AttackNorm::Linf) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v(i) = std::min(center(i) + cfg.eps, std::max(center(i) - cfg.eps, v(i)));
  } else {
    Eigen::VectorXd d = v - center;
    double n = d.norm();
    if (n > cfg.eps) v = center + d * (cfg.eps / n);
  }
}

double sample_loss_and_grad(const nnet::Model& m, const Eigen::VectorXd& params,
                            const Eigen::VectorXd& x, int y, nnet::LossKind kind,
                            Eigen::VectorXd& gx) {
  nnet::ForwardTrace trace;
  Eigen::VectorXd logits = nnet::forward(m, params, x, &trace);
  double l = nnet::sample_loss(logits, y, kind);
  gx.setZero(m.input_dim());
  Eigen::VectorXd seed = nnet::sample_loss_grad(logits, y, kind);
  nnet::backward(m, params, trace, seed, &gx, nullptr);
  return l;
}

inline Eigen::Index pix(const ImageGeom& g, int ch, int y, int x) {
  return (static_cast<Eigen::Index>(ch) * g.h + y) * g.w + x;
}

void require_geom(const ImageGeom& geom, Eigen::Index n, const char* kind) {
  if (!geom.valid())
    throw std::invalid_argument(std::string("corrupt: ") + kind + " requires image-shaped data");
  if (geom.size() != n)
    throw std::invalid_argument(std::string("corrupt: ") + kind + " input does not match geometry");
}

Eigen::VectorXd blur_image(const Eigen::VectorXd& x, const ImageGeom& g, double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel(k + radius) = std::exp(-0.5 * k * k / (sigma * sigma));
  kernel /= kernel.sum();

  // Separable convolution with replicated edges.
  Eigen::VectorXd tmp(x.size());
  for (int c = 0; c < g.ch; ++c)
    for (int y = 0; y < g.h; ++y)
      for (int xx = 0; xx < g.w; ++xx) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int sx = std::min(g.w - 1, std::max(0, xx + k));
          acc += kernel(k + radius) * x(pix(g, c, y, sx));
        }
        tmp(pix(g, c, y, xx)) = acc;
      }
  Eigen::VectorXd out(x.size());
  for (int c = 0; c < g.ch; ++c)
    for (int y = 0; y < g.h; ++y)
      for (int xx = 0; xx < g.w; ++xx) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int sy = std::min(g.h - 1, std::max(0, y + k));
          acc += kernel(k + radius) * tmp(pix(g, c, sy, xx));
        }
        out(pix(g, c, y, xx)) = acc;
      }
  return out;
}

Eigen::VectorXd pixelate_image(const Eigen::VectorXd& x, const ImageGeom& g, int block) {
  Eigen::VectorXd out(x.size());
  for (int c = 0; c < g.ch; ++c)
    for (int by = 0; by < g.h; by += block)
      for (int bx = 0; bx < g.w; bx += block) {
        int ye = std::min(g.h, by + block), xe = std::min(g.w, bx + block);
        double acc = 0.0;
        for (int y = by; y < ye; ++y)
          for (int xx = bx; xx < xe; ++xx) acc += x(pix(g, c, y, xx));
        double avg = acc / ((ye - by) * (xe - bx));
        for (int y = by; y < ye; ++y)
          for (int xx = bx; xx < xe; ++xx) out(pix(g, c, y, xx)) = avg;
      }
  return out;
}

}  // namespace

AttackConfig attack_preset(const std::string& name) {
  AttackConfig c;
  c.name = name;
  if (name == "cifar-l2") {
    c.norm = AttackNorm::L2;
    c.eps = 0.5;
    c.alpha = 0.0125;
    c.steps = 20;
    c.random_start = false;
  } else if (name == "cifar-linf") {
    c.norm = AttackNorm::Linf;
    c.eps = 8.0 / 255.0;
    c.alpha = 2.0 / 255.0;
    c.steps = 7;
    c.random_start = true;
  } else if (name == "tinyinet-l2") {
    c.norm = AttackNorm::L2;
    c.eps = 0.25;
    c.alpha = 0.025;
    c.steps = 10;
    c.random_start = false;
  } else if (name == "tinyinet-linf") {
    c.norm = AttackNorm::Linf;
    c.eps = 8.0 / 255.0;
    c.alpha = 2.0 / 255.0;
    c.steps = 5;
    c.random_start = true;
  } else if (name == "inet-l2") {
    c.norm = AttackNorm::L2;
    c.eps = 0.25;
    c.alpha = 0.025;
    c.steps = 10;
    c.random_start = false;
  } else if (name == "inet-linf") {
    c.norm = AttackNorm::Linf;
    c.eps = 2.0 / 255.0;
    c.alpha = 1.0 / 255.0;
    c.steps = 2;
    c.random_start = true;
  } else {
    throw std::invalid_argument("unknown attack preset: " + name);
  }
  return c;
}

std::vector<std::string> attack_preset_names() {
  return {"cifar-l2", "cifar-linf", "tinyinet-l2", "tinyinet-linf", "inet-l2", "inet-linf"};
}

void validate(const AttackConfig& cfg) {
  if (!(cfg.eps > 0.0) || !(cfg.alpha > 0.0) || cfg.steps < 0)
    throw std::invalid_argument("attack: eps > 0, alpha > 0, steps >= 0 required");
}

Eigen::VectorXd pgd_attack(const nnet::Model& m, const Eigen::VectorXd& params,
                           const Eigen::VectorXd& x, int y, const AttackConfig& cfg,
                           PixelScale scale, uint64_t seed, nnet::LossKind kind) {
  validate(cfg);
  const double box_hi = nnet::pixel_max(scale);
  if (x.minCoeff() < -1e-12 || x.maxCoeff() > box_hi + 1e-12)
    throw std::invalid_argument("pgd: input outside pixel range");

  Eigen::VectorXd gx;
  double best_loss = sample_loss_and_grad(m, params, x, y, kind, gx);
  Eigen::VectorXd best = x;
  if (cfg.steps == 0) return best;

  Eigen::VectorXd cur = x;
  if (cfg.random_start) {
    Rng rng(seed);
    if (cfg.norm == AttackNorm::Linf) {
      for (Eigen::Index i = 0; i < cur.size(); ++i) cur(i) += rng.uniform(-cfg.eps, cfg.eps);
    } else {
      Eigen::VectorXd dir = rng.normal_vector(cur.size());
      double n = dir.norm();
      if (n > 0.0)
        cur += dir * (cfg.eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(cur.size())) / n);
    }
    project_ball(cur, x, cfg);
    clamp_box(cur, box_hi);
  }

  for (int t = 0; t < cfg.steps; ++t) {
    double l = sample_loss_and_grad(m, params, cur, y, kind, gx);
    if (!std::isfinite(l) || !gx.allFinite())
      throw std::runtime_error("pgd: non-finite loss or gradient");
    if (l > best_loss) {
      best_loss = l;
      best = cur;
    }
    if (cfg.norm == AttackNorm::Linf) {
      for (Eigen::Index i = 0; i < cur.size(); ++i) cur(i) += cfg.alpha * sign0(gx(i));
    } else {
      double n = gx.norm();
      if (n > 0.0) cur += (cfg.alpha / n) * gx;
    }
    project_ball(cur, x, cfg);
    clamp_box(cur, box_hi);
  }

  Eigen::VectorXd logits = nnet::forward(m, params, cur);
  double l = nnet::sample_loss(logits, y, kind);
  if (l > best_loss) best = cur;
  return best;
}

bool attack_feasible(const Eigen::VectorXd& x, const Eigen::VectorXd& x_adv,
                     const AttackConfig& cfg, PixelScale scale, double slack) {
  const double box_hi = nnet::pixel_max(scale);
  if (x_adv.minCoeff() < -slack || x_adv.maxCoeff() > box_hi + slack) return false;
  if (cfg.norm == AttackNorm::Linf) return (x_adv - x).lpNorm<Eigen::Infinity>() <= cfg.eps + slack;
  return (x_adv - x).norm() <= cfg.eps + slack;
}

double adversarial_error(const nnet::Model& m, const Eigen::VectorXd& params, const Dataset& d,
                         const AttackConfig& cfg, uint64_t seed, nnet::LossKind kind) {
  if (d.samples.empty()) throw std::invalid_argument("adversarial_error: empty dataset");
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const nnet::Sample& s = d.samples[static_cast<size_t>(i)];
    Eigen::VectorXd xa =
        pgd_attack(m, params, s.x, s.y, cfg, d.scale, seed_mix(seed, static_cast<uint64_t>(i)), kind);
    if (nnet::predict(nnet::forward(m, params, xa)) != s.y) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(d.size());
}

CorruptionKind corruption_from_string(const std::string& s) {
  if (s == "gaussian_noise") return CorruptionKind::GaussianNoise;
  if (s == "shot_noise") return CorruptionKind::ShotNoise;
  if (s == "impulse_noise") return CorruptionKind::ImpulseNoise;
  if (s == "gaussian_blur") return CorruptionKind::GaussianBlur;
  if (s == "contrast") return CorruptionKind::Contrast;
  if (s == "brightness") return CorruptionKind::Brightness;
  if (s == "pixelate") return CorruptionKind::Pixelate;
  throw std::invalid_argument("unknown corruption kind: " + s);
}

std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::GaussianNoise: return "gaussian_noise";
    case CorruptionKind::ShotNoise: return "shot_noise";
    case CorruptionKind::ImpulseNoise: return "impulse_noise";
    case CorruptionKind::GaussianBlur: return "gaussian_blur";
    case CorruptionKind::Contrast: return "contrast";
    case CorruptionKind::Brightness: return "brightness";
    case CorruptionKind::Pixelate: return "pixelate";
  }
  return "gaussian_noise";
}

std::vector<CorruptionKind> all_corruptions() {
  return {CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise, CorruptionKind::ImpulseNoise,
          CorruptionKind::GaussianBlur,  CorruptionKind::Contrast,  CorruptionKind::Brightness,
          CorruptionKind::Pixelate};
}

const SeverityTables& severity_tables() {
  static const SeverityTables t;
  return t;
}

Eigen::VectorXd corrupt(const Eigen::VectorXd& x, const CorruptionSpec& spec,
                        const ImageGeom& geom, PixelScale scale, uint64_t seed) {
  if (spec.severity < 1 || spec.severity > kSeverityLevels)
    throw std::invalid_argument("corrupt: severity must be in 1..5");
  const SeverityTables& tab = severity_tables();
  const int s = spec.severity - 1;
  const double hi = nnet::pixel_max(scale);
  Rng rng(seed);
  Eigen::VectorXd out = x;

  switch (spec.kind) {
    case CorruptionKind::GaussianNoise: {
      double sigma = tab.gaussian_sigma[s] * hi;
      for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += sigma * rng.normal();
      break;
    }
    case CorruptionKind::ShotNoise: {
      double lam = tab.shot_rate[s];
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        double intensity = std::min(1.0, std::max(0.0, x(i) / hi));
        out(i) = hi * static_cast<double>(rng.poisson(intensity * lam)) / lam;
      }
      break;
    }
    case CorruptionKind::ImpulseNoise: {
      double frac = tab.impulse_frac[s];
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        double u = rng.uniform();
        if (u < frac / 2.0)
          out(i) = 0.0;
        else if (u < frac)
          out(i) = hi;
      }
      break;
    }
    case CorruptionKind::GaussianBlur:
      require_geom(geom, x.size(), "gaussian_blur");
      out = blur_image(x, geom, tab.blur_sigma[s]);
      break;
    case CorruptionKind::Contrast: {
      double mu = x.mean();
      out = (mu + tab.contrast_gain[s] * (x.array() - mu)).matrix();
      break;
    }
    case CorruptionKind::Brightness:
      out = (x.array() + tab.brightness_shift[s] * hi).matrix();
      break;
    case CorruptionKind::Pixelate: {
      require_geom(geom, x.size(), "pixelate");
      int block = std::max(
          1, static_cast<int>(std::ceil(std::min(geom.h, geom.w) * tab.pixelate_frac[s])));
      out = pixelate_image(x, geom, block);
      break;
    }
  }
  clamp_box(out, hi);
  return out;
}

Dataset corrupt_dataset(const Dataset& d, const CorruptionSpec& spec, uint64_t seed) {
  d.validate();
  Dataset out = d;
  out.name = d.name + "+" + to_string(spec.kind) + "@" + std::to_string(spec.severity);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    out.samples[static_cast<size_t>(i)].x =
        corrupt(d.samples[static_cast<size_t>(i)].x, spec, d.geom, d.scale,
                seed_mix(seed, static_cast<uint64_t>(spec.kind), static_cast<uint64_t>(spec.severity),
                         static_cast<uint64_t>(i)));
  return out;
}

double grid_mean(const std::vector<CorruptionCell>& grid) {
  if (grid.empty()) throw std::invalid_argument("grid_mean: empty grid");
  std::vector<double> errs(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) errs[i] = grid[i].error;
  return pairwise_mean(errs);
}

RobustnessReport mce(const nnet::Model& m, const Eigen::VectorXd& params, const Dataset& clean_test,
                     const std::vector<CorruptionKind>& kinds, const std::vector<int>& severities,
                     uint64_t seed) {
  if (kinds.empty() || severities.empty()) throw std::invalid_argument("mce: empty grid");
  RobustnessReport rep;
  rep.clean_error = nnet::dataset_error(m, params, clean_test);
  for (CorruptionKind kind : kinds)
    for (int sev : severities) {
      Dataset corrupted = corrupt_dataset(clean_test, CorruptionSpec{kind, sev}, seed);
      rep.grid.push_back(CorruptionCell{kind, sev, nnet::dataset_error(m, params, corrupted)});
    }
  rep.mce = grid_mean(rep.grid);
  return rep;
}

}  // namespace augflat::robustness
