// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "augflat/dataset.hpp"
#include "augflat/model.hpp"

namespace augflat::duality {

// ParamToInput: input ball compensating a parameter ball of radius gamma.
// InputToParam: parameter ball compensating an input ball of radius gamma.
enum class Direction { ParamToInput, InputToParam };

struct CompensatoryRadius {
  Direction direction;
  double gamma = 0.0;
  double worst_ratio = 0.0;  // sup over the dataset of the per-point ratio
  double radius = 0.0;       // worst_ratio * gamma
  std::vector<std::pair<Eigen::Index, double>> per_point;
};

// sigma_max(num) / sigma_min(den). Throws when den is numerically
// rank-deficient, since the ratio is then unbounded.
double spectral_ratio(const Eigen::MatrixXd& num, const Eigen::MatrixXd& den);

CompensatoryRadius radius_from_ratios(Direction dir, double gamma,
                                      std::vector<std::pair<Eigen::Index, double>> per_point);

// Worst case over the dataset of sigma_max(J_theta) / sigma_min(J_x),
// times gamma.
CompensatoryRadius compensatory_input_radius(const nnet::Model& m, const Eigen::VectorXd& params,
                                             const nnet::Dataset& d, double gamma);

// Worst case over the dataset of sigma_max(J_x) / sigma_min(J_theta),
// times gamma.
CompensatoryRadius compensatory_param_radius(const nnet::Model& m, const Eigen::VectorXd& params,
                                             const nnet::Dataset& d, double gamma);

// Minimal-norm first-order translations between perturbation spaces:
// delta = pinv(J_x) J_theta Delta and Delta = pinv(J_theta) J_x delta.
// Any kernel component is a valid addition; these return the zero-kernel
// representative.
Eigen::VectorXd translate_param_to_input(const nnet::Model& m, const Eigen::VectorXd& params,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& big_delta);

Eigen::VectorXd translate_input_to_param(const nnet::Model& m, const Eigen::VectorXd& params,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& delta);

// || f(x + delta; theta) - f(x; theta + Delta) ||_2, evaluated with exact
// forward passes.
double duality_residual(const nnet::Model& m, const Eigen::VectorXd& params,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& big_delta);

// Parameter-space resolution induced by an input tolerance gamma_a.
double gamma_theta(const nnet::Model& m, const Eigen::VectorXd& params, const nnet::Dataset& d,
                   double gamma_a);

// log10 of ceil(diam / gamma_th)^p, kept in log space because the count
// itself overflows any integer type for realistic p.
double covering_log10_count(double diam, double gamma_th, Eigen::Index p);

// Total-variation style divergence 2 * sup_A |P(A) - Q(A)| between two
// distributions on the same finite support, which reduces to the L1 distance.
double div_total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct CoverageReport {
  double gamma_a = 0.0;
  double gamma_th = 0.0;
  double diam = 0.0;
  Eigen::Index param_count = 0;
  double log10_count = 0.0;
  std::optional<double> divergence;
};

CoverageReport coverage_report(const nnet::Model& m, const Eigen::VectorXd& params,
                               const nnet::Dataset& d, double gamma_a, double diam,
                               const std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>&
                                   source_target = std::nullopt);

}  // namespace augflat::duality
