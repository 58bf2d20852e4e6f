// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "augflat/dataset.hpp"
#include "augflat/loss.hpp"
#include "augflat/model.hpp"

namespace augflat::robustness {

using nnet::Dataset;
using nnet::ImageGeom;
using nnet::PixelScale;

enum class AttackNorm { L2, Linf };

struct AttackConfig {
  AttackNorm norm = AttackNorm::L2;
  double eps = 0.5;
  double alpha = 0.0125;
  int steps = 20;
  bool random_start = false;
  std::string name;  // preset id carried into reports
};

// Named presets: cifar-l2, cifar-linf, tinyinet-l2, tinyinet-linf, inet-l2,
// inet-linf. Budgets assume unit-scale pixels.
AttackConfig attack_preset(const std::string& name);
std::vector<std::string> attack_preset_names();
void validate(const AttackConfig& cfg);

// Untargeted PGD ascent on the per-sample loss. Each step takes a signed
// (Linf) or L2-normalized gradient move of length alpha, projects back onto
// the eps-ball around the clean input, then clamps to the pixel box. The
// returned point is the best-loss iterate seen, with the clean input always a
// candidate, so the attack never reports a loss below the clean loss.
Eigen::VectorXd pgd_attack(const nnet::Model& m, const Eigen::VectorXd& params,
                           const Eigen::VectorXd& x, int y, const AttackConfig& cfg,
                           PixelScale scale, uint64_t seed,
                           nnet::LossKind kind = nnet::LossKind::CrossEntropy);

// Both the norm-ball and pixel-box constraints, with additive slack.
bool attack_feasible(const Eigen::VectorXd& x, const Eigen::VectorXd& x_adv,
                     const AttackConfig& cfg, PixelScale scale, double slack = 1e-9);

// Percent of samples misclassified after per-sample attacks.
double adversarial_error(const nnet::Model& m, const Eigen::VectorXd& params, const Dataset& d,
                         const AttackConfig& cfg, uint64_t seed,
                         nnet::LossKind kind = nnet::LossKind::CrossEntropy);

enum class CorruptionKind {
  GaussianNoise,
  ShotNoise,
  ImpulseNoise,
  GaussianBlur,
  Contrast,
  Brightness,
  Pixelate
};

CorruptionKind corruption_from_string(const std::string& s);
std::string to_string(CorruptionKind k);
std::vector<CorruptionKind> all_corruptions();

inline constexpr int kSeverityLevels = 5;

// Per-severity constants, unit pixel scale. Amplitude-like entries are
// rescaled by 255 for byte data inside corrupt().
struct SeverityTables {
  double gaussian_sigma[kSeverityLevels] = {0.08, 0.12, 0.18, 0.26, 0.38};
  double shot_rate[kSeverityLevels] = {60.0, 25.0, 12.0, 5.0, 3.0};  // photons at full intensity
  double impulse_frac[kSeverityLevels] = {0.03, 0.06, 0.09, 0.17, 0.27};
  double blur_sigma[kSeverityLevels] = {0.4, 0.6, 0.8, 1.0, 1.5};
  double contrast_gain[kSeverityLevels] = {0.75, 0.5, 0.4, 0.3, 0.15};
  double brightness_shift[kSeverityLevels] = {0.05, 0.1, 0.15, 0.2, 0.3};
  double pixelate_frac[kSeverityLevels] = {0.15, 0.25, 0.35, 0.45, 0.6};  // of min(h, w)
};

const SeverityTables& severity_tables();

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::GaussianNoise;
  int severity = 1;  // 1..kSeverityLevels
};

// Deterministic given the seed; output clamped to the pixel range. Blur and
// pixelate require image geometry.
Eigen::VectorXd corrupt(const Eigen::VectorXd& x, const CorruptionSpec& spec,
                        const ImageGeom& geom, PixelScale scale, uint64_t seed);

Dataset corrupt_dataset(const Dataset& d, const CorruptionSpec& spec, uint64_t seed);

struct CorruptionCell {
  CorruptionKind kind = CorruptionKind::GaussianNoise;
  int severity = 1;
  double error = 0.0;  // percent
};

struct RobustnessReport {
  double clean_error = 0.0;
  std::vector<std::pair<std::string, double>> adv_error;  // (attack name, percent)
  std::vector<CorruptionCell> grid;
  double mce = 0.0;  // unweighted mean over grid cells
};

double grid_mean(const std::vector<CorruptionCell>& grid);

// Error grid over kinds x severities on corrupted copies of clean_test, plus
// the clean error. Adversarial rows are appended by callers that run attacks.
RobustnessReport mce(const nnet::Model& m, const Eigen::VectorXd& params, const Dataset& clean_test,
                     const std::vector<CorruptionKind>& kinds, const std::vector<int>& severities,
                     uint64_t seed);

}  // namespace augflat::robustness
