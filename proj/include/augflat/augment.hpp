// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "augflat/dataset.hpp"

namespace augflat::augment {

using nnet::Dataset;
using nnet::ImageGeom;
using nnet::PixelScale;

// Noise amplitudes and brightness shifts are in the dataset's native pixel
// units, so byte-scale data takes byte-scale parameters.
struct GaussianNoise {
  double sigma = 0.0;
};
struct UniformNoise {
  double amplitude = 0.0;
};
struct Translate {
  int max_px = 0;
};
struct Rotate {
  double max_deg = 0.0;
};
struct HFlip {
  double prob = 0.5;
};
struct Contrast {
  double lo = 1.0, hi = 1.0;  // gain range applied around the image mean
};
struct Brightness {
  double lo = 0.0, hi = 0.0;  // additive shift range
};
// Width parallel chains of 1..depth random geometric ops, Dirichlet-weighted
// and Beta-mixed with the original image.
struct ChainMix {
  int width = 3;
  int depth = 3;
  double dirichlet_alpha = 1.0;
  double beta_alpha = 1.0;
};
// Repeated blending with procedural plasma patterns.
struct PatternMix {
  int mix_rounds = 3;
  double beta = 3.0;  // Beta(beta, 1) keep-weight, biased toward the image
};

using AugmentationConfig = std::variant<GaussianNoise, UniformNoise, Translate, Rotate, HFlip,
                                        Contrast, Brightness, ChainMix, PatternMix>;

void validate(const AugmentationConfig& cfg);
std::string describe(const AugmentationConfig& cfg);

nlohmann::json config_to_json(const AugmentationConfig& cfg);
AugmentationConfig config_from_json(const nlohmann::json& j);

// Label-preserving randomized map. Geometric kinds require valid image
// geometry; image-shaped outputs are clamped to the declared pixel range.
// Identical (cfg, x, seed) triples produce identical outputs.
Eigen::VectorXd apply(const AugmentationConfig& cfg, const Eigen::VectorXd& x,
                      const ImageGeom& geom, PixelScale scale, uint64_t seed);

// chain_mix internals, exposed so the convex-combination law is checkable.
struct ChainMixParts {
  std::vector<Eigen::VectorXd> chains;
  std::vector<double> weights;  // simplex weights over the chains
  double keep = 0.0;            // mixing weight left on the original image
};

ChainMixParts chain_mix_parts(const ChainMix& cfg, const Eigen::VectorXd& x, const ImageGeom& geom,
                              PixelScale scale, uint64_t seed);

// keep * x + (1 - keep) * sum_i weights[i] * chains[i], before clamping.
Eigen::VectorXd chain_mix_premix(const Eigen::VectorXd& x, const ChainMixParts& parts);

// Diamond-square height field, min-max normalized to [0, 1].
Eigen::MatrixXd plasma_pattern(int h, int w, uint64_t seed);

struct DistanceSampleSet {
  std::vector<double> distances;
  std::string aug;
  PixelScale scale = PixelScale::Unit;
};

// n draws d_i = ||A(x_{i mod |D|}) - x_{i mod |D|}||_2 with per-draw seeds
// derived from (seed, i).
DistanceSampleSet distance_samples(const AugmentationConfig& cfg, const Dataset& d, int n,
                                   uint64_t seed);

// Fraction of recorded distances <= gamma.
double ecdf(const std::vector<double>& distances, double gamma);
double ecdf(const DistanceSampleSet& s, double gamma);

// Minimum proximal mass at the designated threshold for an augmentation to
// count as concentrated near its inputs.
inline constexpr double kComplianceCutoff = 0.01;
// Quantile level reported as the empirical proximal radius.
inline constexpr double kQuantileLevel = 0.01;

struct PsaReport {
  std::vector<std::pair<double, double>> ecdf_at;  // (threshold, empirical CDF)
  double gamma_star = 0.0;
  double gamma_a_hat = 0.0;  // empirical kQuantileLevel-quantile of distances
  bool compliant = false;
};

PsaReport psa_score(const AugmentationConfig& cfg, const Dataset& d,
                    const std::vector<double>& thresholds, double gamma_star, int n, uint64_t seed);

}  // namespace augflat::augment
