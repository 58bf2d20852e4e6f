// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "augflat/dataset.hpp"
#include "augflat/loss.hpp"
#include "augflat/model.hpp"

namespace augflat::flatness {

// Scalar risk over parameter space with its gradient. Model risks and
// closed-form synthetic surfaces share this interface, so every estimator
// below is exercised against analytic oracles with no model in the loop.
struct RiskSurface {
  Eigen::Index dim = 0;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

RiskSurface model_surface(const nnet::Model& m, const nnet::Dataset& d, nnet::LossKind kind);

struct SearchRange {
  double lo = 1e-6;
  double hi = 10.0;
  int iters = 30;
};

struct FlatnessConfig {
  double tau = 0.05;        // admissible mean-loss deviation for the noise scale
  double sigma_lpf = 0.01;  // smoothing kernel std
  double rho_sharp = 0.1;   // sharpness search radius
  int mc_samples = 20;
  SearchRange search;  // shared by both binary searches
  double tol_b = 1e-3;
  uint64_t seed = 0;
  int restarts = 5;  // projected-ascent restarts for sharpness
  int steps = 20;
  int ascent_probes = 2;  // extra ascent starts inside the radius search
  int ascent_steps = 10;
};

FlatnessConfig cifar_preset();
FlatnessConfig inet_preset();  // relaxed deviation budget and search radius
void validate(const FlatnessConfig& cfg);

// saturated: +1 pinned at search.hi (flatter than measurable), -1 pinned at
// search.lo (sharper than measurable), 0 interior.
struct PacBayesResult {
  double mu = 0.0;
  double sigma_star = 0.0;
  double mc_stderr = 0.0;
  int saturated = 0;
};

struct LpfResult {
  double value = 0.0;
  double mc_stderr = 0.0;
};

struct SharpnessResult {
  double value = 0.0;  // percent rise, normalized by 1 + base risk
};

struct BFlatResult {
  double b_hat = 0.0;
  double mc_stderr = 0.0;
  int saturated = 0;
};

struct FlatnessReport {
  PacBayesResult pac;
  LpfResult lpf;
  SharpnessResult sharp;
  BFlatResult bflat;
};

// Reciprocal of the largest noise scale sigma in [search.lo, search.hi] with
// |E[risk(theta + sigma z)] - risk(theta)| <= tau, z standard normal. The
// same mc_samples draws are reused for every candidate scale, which keeps the
// bisection predicate deterministic and monotone on the surfaces of interest.
PacBayesResult pac_bayes_mu(const RiskSurface& s, const Eigen::VectorXd& theta,
                            const FlatnessConfig& cfg);

// Monte-Carlo estimate of the Gaussian-smoothed risk E[risk(theta + sigma z)].
LpfResult lpf(const RiskSurface& s, const Eigen::VectorXd& theta, const FlatnessConfig& cfg);

// max over ||delta|| <= rho of (risk(theta+delta) - risk(theta)), normalized
// by 1 + risk(theta), in percent. Projected gradient ascent with fixed
// restart/step budget and deterministic seeds.
SharpnessResult eps_sharpness(const RiskSurface& s, const Eigen::VectorXd& theta,
                              const FlatnessConfig& cfg);

// Largest b in [search.lo, search.hi] with max over sampled ||delta|| <= b of
// |risk(theta+delta) - risk(theta)| <= tol_b. The inner max combines
// uniform-ball draws, boundary probes and gradient-ascent probes.
BFlatResult b_flat_radius(const RiskSurface& s, const Eigen::VectorXd& theta,
                          const FlatnessConfig& cfg);

FlatnessReport evaluate(const RiskSurface& s, const Eigen::VectorXd& theta,
                        const FlatnessConfig& cfg);

PacBayesResult pac_bayes_mu(const nnet::Model& m, const Eigen::VectorXd& params,
                            const nnet::Dataset& d, const FlatnessConfig& cfg,
                            nnet::LossKind kind = nnet::LossKind::CrossEntropy);
LpfResult lpf(const nnet::Model& m, const Eigen::VectorXd& params, const nnet::Dataset& d,
              const FlatnessConfig& cfg, nnet::LossKind kind = nnet::LossKind::CrossEntropy);
SharpnessResult eps_sharpness(const nnet::Model& m, const Eigen::VectorXd& params,
                              const nnet::Dataset& d, const FlatnessConfig& cfg,
                              nnet::LossKind kind = nnet::LossKind::CrossEntropy);
BFlatResult b_flat_radius(const nnet::Model& m, const Eigen::VectorXd& params,
                          const nnet::Dataset& d, const FlatnessConfig& cfg,
                          nnet::LossKind kind = nnet::LossKind::CrossEntropy);
FlatnessReport evaluate(const nnet::Model& m, const Eigen::VectorXd& params, const nnet::Dataset& d,
                        const FlatnessConfig& cfg,
                        nnet::LossKind kind = nnet::LossKind::CrossEntropy);

}  // namespace augflat::flatness
