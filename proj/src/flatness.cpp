// SPDX-License-Identifier: Apache-2.0
#include "augflat/flatness.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "augflat/numerics.hpp"

namespace augflat::flatness {

namespace {

constexpr uint64_t kPacStream = 0x9acb5;
constexpr uint64_t kLpfStream = 0x15f;
constexpr uint64_t kSharpStream = 0x54a59;
constexpr uint64_t kBallStream = 0xba11;
constexpr uint64_t kProbeStream = 0x9c0be;

void check_surface(const RiskSurface& s) {
  if (s.dim < 1 || !s.value) throw std::invalid_argument("flatness: incomplete risk surface");
}

void check_theta(const RiskSurface& s, const Eigen::VectorXd& theta) {
  check_surface(s);
  if (theta.size() != s.dim) throw std::invalid_argument("flatness: theta has wrong length");
}

// Pre-drawn standard normal directions, shared across all candidate scales of
// one binary search.
std::vector<Eigen::VectorXd> draw_directions(Eigen::Index dim, int count, uint64_t seed,
                                             uint64_t stream) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<size_t>(count));
  for (int j = 0; j < count; ++j) {
    Rng rng(seed_mix(seed, stream, static_cast<uint64_t>(j)));
    out.push_back(rng.normal_vector(dim));
  }
  return out;
}

struct Bisection {
  double picked = 0.0;
  int saturated = 0;
};

// Largest feasible scale under a monotone predicate, bracketed in
// [search.lo, search.hi].
template <typename Pred>
Bisection max_feasible(const SearchRange& search, Pred&& feasible) {
  Bisection r;
  if (!feasible(search.lo)) {
    r.picked = search.lo;
    r.saturated = -1;
    return r;
  }
  if (feasible(search.hi)) {
    r.picked = search.hi;
    r.saturated = +1;
    return r;
  }
  double a = search.lo, b = search.hi;
  for (int i = 0; i < search.iters; ++i) {
    double mid = 0.5 * (a + b);
    if (feasible(mid))
      a = mid;
    else
      b = mid;
  }
  r.picked = a;
  return r;
}

}  // namespace

RiskSurface model_surface(const nnet::Model& m, const nnet::Dataset& d, nnet::LossKind kind) {
  d.validate();
  if (d.samples.empty()) throw std::invalid_argument("flatness: empty dataset");
  auto xs = std::make_shared<Eigen::MatrixXd>();
  auto ys = std::make_shared<std::vector<int>>();
  d.to_matrix(*xs, *ys);
  auto model = std::make_shared<nnet::Model>(m);

  RiskSurface s;
  s.dim = m.param_count();
  s.value = [model, xs, ys, kind](const Eigen::VectorXd& theta) {
    return nnet::batch_risk(*model, theta, *xs, *ys, kind);
  };
  s.grad = [model, xs, ys, kind](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g;
    nnet::batch_risk_grad(*model, theta, *xs, *ys, kind, g);
    return g;
  };
  return s;
}

FlatnessConfig cifar_preset() { return FlatnessConfig{}; }

FlatnessConfig inet_preset() {
  FlatnessConfig cfg;
  cfg.tau = 0.35;
  cfg.rho_sharp = 1.0;
  return cfg;
}

void validate(const FlatnessConfig& cfg) {
  if (!(cfg.tau > 0.0) || !(cfg.sigma_lpf > 0.0) || !(cfg.rho_sharp > 0.0) || !(cfg.tol_b > 0.0))
    throw std::invalid_argument("flatness: scales must be positive");
  if (cfg.mc_samples < 1 || cfg.restarts < 1 || cfg.steps < 1 || cfg.ascent_probes < 0 ||
      cfg.ascent_steps < 1)
    throw std::invalid_argument("flatness: sample budgets must be positive");
  if (!(cfg.search.lo > 0.0) || !(cfg.search.lo < cfg.search.hi) || cfg.search.iters < 1)
    throw std::invalid_argument("flatness: search range must satisfy 0 < lo < hi");
}

PacBayesResult pac_bayes_mu(const RiskSurface& s, const Eigen::VectorXd& theta,
                            const FlatnessConfig& cfg) {
  validate(cfg);
  check_theta(s, theta);
  const double base = s.value(theta);
  auto dirs = draw_directions(s.dim, cfg.mc_samples, cfg.seed, kPacStream);

  auto values_at = [&](double sigma) {
    std::vector<double> vals(dirs.size());
    for (size_t j = 0; j < dirs.size(); ++j) vals[j] = s.value(theta + sigma * dirs[j]);
    return vals;
  };
  auto feasible = [&](double sigma) {
    std::vector<double> vals = values_at(sigma);
    return std::abs(pairwise_mean(vals) - base) <= cfg.tau;
  };

  Bisection b = max_feasible(cfg.search, feasible);
  PacBayesResult r;
  r.sigma_star = b.picked;
  r.saturated = b.saturated;
  r.mu = 1.0 / b.picked;
  r.mc_stderr = mean_stderr(values_at(b.picked));
  return r;
}

LpfResult lpf(const RiskSurface& s, const Eigen::VectorXd& theta, const FlatnessConfig& cfg) {
  validate(cfg);
  check_theta(s, theta);
  std::vector<double> vals(static_cast<size_t>(cfg.mc_samples));
  for (int j = 0; j < cfg.mc_samples; ++j) {
    Rng rng(seed_mix(cfg.seed, kLpfStream, static_cast<uint64_t>(j)));
    vals[static_cast<size_t>(j)] = s.value(theta + cfg.sigma_lpf * rng.normal_vector(s.dim));
  }
  LpfResult r;
  r.value = pairwise_mean(vals);
  r.mc_stderr = mean_stderr(vals);
  return r;
}

SharpnessResult eps_sharpness(const RiskSurface& s, const Eigen::VectorXd& theta,
                              const FlatnessConfig& cfg) {
  validate(cfg);
  check_theta(s, theta);
  if (!s.grad) throw std::invalid_argument("eps_sharpness: surface has no gradient");

  const double base = s.value(theta);
  if (!std::isfinite(base)) throw std::runtime_error("eps_sharpness: non-finite base risk");
  const double rho = cfg.rho_sharp;
  const double step = rho / 10.0;
  double best = base;

  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(seed_mix(cfg.seed, kSharpStream, static_cast<uint64_t>(r)));
    Eigen::VectorXd delta;
    if (r == 0) {
      delta = Eigen::VectorXd::Zero(s.dim);
    } else {
      delta = rng.normal_vector(s.dim);
      double n = delta.norm();
      if (n == 0.0) n = 1.0;
      delta *= rho * std::pow(rng.uniform(), 1.0 / static_cast<double>(s.dim)) / n;
    }
    double v = s.value(theta + delta);
    if (!std::isfinite(v)) throw std::runtime_error("eps_sharpness: ascent reached non-finite loss");
    best = std::max(best, v);
    for (int t = 0; t < cfg.steps; ++t) {
      Eigen::VectorXd g = s.grad(theta + delta);
      if (!g.allFinite()) throw std::runtime_error("eps_sharpness: non-finite gradient");
      double gn = g.norm();
      if (gn == 0.0) break;
      delta += (step / gn) * g;
      double dn = delta.norm();
      if (dn > rho) delta *= rho / dn;
      v = s.value(theta + delta);
      if (!std::isfinite(v)) throw std::runtime_error("eps_sharpness: ascent reached non-finite loss");
      best = std::max(best, v);
    }
  }

  SharpnessResult out;
  out.value = 100.0 * (best - base) / (1.0 + base);
  return out;
}

BFlatResult b_flat_radius(const RiskSurface& s, const Eigen::VectorXd& theta,
                          const FlatnessConfig& cfg) {
  validate(cfg);
  check_theta(s, theta);
  const double base = s.value(theta);

  // Fixed unit directions and radial fractions, rescaled per candidate b.
  auto dirs = draw_directions(s.dim, cfg.mc_samples, cfg.seed, kBallStream);
  std::vector<double> fracs(dirs.size());
  for (size_t j = 0; j < dirs.size(); ++j) {
    double n = dirs[j].norm();
    if (n == 0.0) n = 1.0;
    dirs[j] /= n;
    Rng rng(seed_mix(cfg.seed, kBallStream + 1, static_cast<uint64_t>(j)));
    fracs[j] = std::pow(rng.uniform(), 1.0 / static_cast<double>(s.dim));
  }

  auto deviations_at = [&](double b) {
    std::vector<double> devs;
    devs.reserve(dirs.size() * 2);
    for (size_t j = 0; j < dirs.size(); ++j) {
      devs.push_back(std::abs(s.value(theta + (b * fracs[j]) * dirs[j]) - base));
      devs.push_back(std::abs(s.value(theta + b * dirs[j]) - base));
    }
    return devs;
  };

  auto max_deviation = [&](double b) {
    double worst = 0.0;
    for (double d : deviations_at(b)) worst = std::max(worst, d);
    if (s.grad) {
      for (int r = 0; r < cfg.ascent_probes; ++r) {
        Rng rng(seed_mix(cfg.seed, kProbeStream, static_cast<uint64_t>(r)));
        Eigen::VectorXd delta = rng.normal_vector(s.dim);
        double n = delta.norm();
        if (n == 0.0) n = 1.0;
        delta *= 0.5 * b / n;
        for (int t = 0; t < cfg.ascent_steps; ++t) {
          double dev = s.value(theta + delta) - base;
          worst = std::max(worst, std::abs(dev));
          Eigen::VectorXd g = s.grad(theta + delta);
          double gn = g.norm();
          if (gn == 0.0) break;
          delta += (dev >= 0.0 ? 1.0 : -1.0) * (b / cfg.ascent_steps / gn) * g;
          double dn = delta.norm();
          if (dn > b) delta *= b / dn;
        }
        worst = std::max(worst, std::abs(s.value(theta + delta) - base));
      }
    }
    return worst;
  };

  Bisection pick = max_feasible(cfg.search, [&](double b) { return max_deviation(b) <= cfg.tol_b; });

  BFlatResult r;
  r.b_hat = pick.picked;
  r.saturated = pick.saturated;
  r.mc_stderr = mean_stderr(deviations_at(pick.picked));
  return r;
}

FlatnessReport evaluate(const RiskSurface& s, const Eigen::VectorXd& theta,
                        const FlatnessConfig& cfg) {
  FlatnessReport rep;
  rep.pac = pac_bayes_mu(s, theta, cfg);
  rep.lpf = lpf(s, theta, cfg);
  rep.sharp = eps_sharpness(s, theta, cfg);
  rep.bflat = b_flat_radius(s, theta, cfg);
  return rep;
}

PacBayesResult pac_bayes_mu(const nnet::Model& m, const Eigen::VectorXd& params,
                            const nnet::Dataset& d, const FlatnessConfig& cfg, nnet::LossKind kind) {
  return pac_bayes_mu(model_surface(m, d, kind), params, cfg);
}

LpfResult lpf(const nnet::Model& m, const Eigen::VectorXd& params, const nnet::Dataset& d,
              const FlatnessConfig& cfg, nnet::LossKind kind) {
  return lpf(model_surface(m, d, kind), params, cfg);
}

SharpnessResult eps_sharpness(const nnet::Model& m, const Eigen::VectorXd& params,
                              const nnet::Dataset& d, const FlatnessConfig& cfg,
                              nnet::LossKind kind) {
  return eps_sharpness(model_surface(m, d, kind), params, cfg);
}

BFlatResult b_flat_radius(const nnet::Model& m, const Eigen::VectorXd& params,
                          const nnet::Dataset& d, const FlatnessConfig& cfg, nnet::LossKind kind) {
  return b_flat_radius(model_surface(m, d, kind), params, cfg);
}

FlatnessReport evaluate(const nnet::Model& m, const Eigen::VectorXd& params, const nnet::Dataset& d,
                        const FlatnessConfig& cfg, nnet::LossKind kind) {
  return evaluate(model_surface(m, d, kind), params, cfg);
}

}  // namespace augflat::flatness
