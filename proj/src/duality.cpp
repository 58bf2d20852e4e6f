// SPDX-License-Identifier: Apache-2.0
#include "augflat/duality.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "augflat/jacobian.hpp"
#include "augflat/linalg.hpp"

namespace augflat::duality {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("compensatory radius: gamma must be positive");
}

void check_nonempty(const nnet::Dataset& d) {
  if (d.samples.empty()) throw std::invalid_argument("compensatory radius: empty dataset");
}

double ratio_or_throw(const Eigen::MatrixXd& num, const Eigen::MatrixXd& den,
                      const char* den_name, Eigen::Index sample) {
  linalg::SigmaExtrema dn = linalg::sigma_extrema(den);
  if (dn.rank_deficient)
    throw std::runtime_error(std::string(den_name) + " numerically rank-deficient at sample " +
                             std::to_string(sample));
  linalg::SigmaExtrema nm = linalg::sigma_extrema(num);
  return nm.max / dn.min;
}

CompensatoryRadius scan_dataset(const nnet::Model& m, const Eigen::VectorXd& params,
                                const nnet::Dataset& d, double gamma, Direction dir) {
  check_gamma(gamma);
  check_nonempty(d);
  std::vector<std::pair<Eigen::Index, double>> ratios;
  ratios.reserve(d.samples.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    nnet::JacobianPair j = nnet::jacobian_pair(m, params, d.samples[static_cast<size_t>(i)].x);
    double r = dir == Direction::ParamToInput
                   ? ratio_or_throw(j.jtheta, j.jx, "input Jacobian", i)
                   : ratio_or_throw(j.jx, j.jtheta, "parameter Jacobian", i);
    ratios.emplace_back(i, r);
  }
  return radius_from_ratios(dir, gamma, std::move(ratios));
}

}  // namespace

double spectral_ratio(const Eigen::MatrixXd& num, const Eigen::MatrixXd& den) {
  return ratio_or_throw(num, den, "denominator Jacobian", -1);
}

CompensatoryRadius radius_from_ratios(Direction dir, double gamma,
                                      std::vector<std::pair<Eigen::Index, double>> per_point) {
  check_gamma(gamma);
  if (per_point.empty()) throw std::invalid_argument("radius_from_ratios: no ratios");
  CompensatoryRadius r;
  r.direction = dir;
  r.gamma = gamma;
  r.per_point = std::move(per_point);
  r.worst_ratio = 0.0;
  for (const auto& [idx, ratio] : r.per_point) {
    (void)idx;
    if (!(ratio >= 0.0) || !std::isfinite(ratio))
      throw std::invalid_argument("radius_from_ratios: non-finite ratio");
    r.worst_ratio = std::max(r.worst_ratio, ratio);
  }
  r.radius = r.worst_ratio * gamma;
  return r;
}

CompensatoryRadius compensatory_input_radius(const nnet::Model& m, const Eigen::VectorXd& params,
                                             const nnet::Dataset& d, double gamma) {
  return scan_dataset(m, params, d, gamma, Direction::ParamToInput);
}

CompensatoryRadius compensatory_param_radius(const nnet::Model& m, const Eigen::VectorXd& params,
                                             const nnet::Dataset& d, double gamma) {
  return scan_dataset(m, params, d, gamma, Direction::InputToParam);
}

Eigen::VectorXd translate_param_to_input(const nnet::Model& m, const Eigen::VectorXd& params,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& big_delta) {
  if (big_delta.size() != m.param_count())
    throw std::invalid_argument("translate: parameter perturbation has wrong length");
  nnet::JacobianPair j = nnet::jacobian_pair(m, params, x);
  linalg::SvdResult s = linalg::svd(j.jx);
  if (s.rank() < j.jx.rows())
    throw std::runtime_error("translate: input Jacobian numerically rank-deficient");
  return linalg::pinv(s) * (j.jtheta * big_delta);
}

Eigen::VectorXd translate_input_to_param(const nnet::Model& m, const Eigen::VectorXd& params,
                                         const Eigen::VectorXd& x, const Eigen::VectorXd& delta) {
  if (delta.size() != m.input_dim())
    throw std::invalid_argument("translate: input perturbation has wrong length");
  nnet::JacobianPair j = nnet::jacobian_pair(m, params, x);
  linalg::SvdResult s = linalg::svd(j.jtheta);
  if (s.rank() < j.jtheta.rows())
    throw std::runtime_error("translate: parameter Jacobian numerically rank-deficient");
  return linalg::pinv(s) * (j.jx * delta);
}

double duality_residual(const nnet::Model& m, const Eigen::VectorXd& params,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& big_delta) {
  Eigen::VectorXd lhs = nnet::forward(m, params, x + delta);
  Eigen::VectorXd rhs = nnet::forward(m, params + big_delta, x);
  return (lhs - rhs).norm();
}

double gamma_theta(const nnet::Model& m, const Eigen::VectorXd& params, const nnet::Dataset& d,
                   double gamma_a) {
  CompensatoryRadius r = compensatory_input_radius(m, params, d, gamma_a);
  return gamma_a / r.worst_ratio;
}

double covering_log10_count(double diam, double gamma_th, Eigen::Index p) {
  if (!(diam > 0.0)) throw std::invalid_argument("covering: diameter must be positive");
  if (!(gamma_th > 0.0)) throw std::invalid_argument("covering: resolution must be positive");
  if (p < 1) throw std::invalid_argument("covering: dimension must be >= 1");
  if (gamma_th >= diam) return 0.0;
  double cells = std::ceil(diam / gamma_th);
  return static_cast<double>(p) * std::log10(cells);
}

double div_total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("divergence: distributions have mismatched support");
  if (p.size() == 0) throw std::invalid_argument("divergence: empty support");
  double sp = 0.0, sq = 0.0, l1 = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) < 0.0 || q(i) < 0.0)
      throw std::invalid_argument("divergence: negative probability mass");
    sp += p(i);
    sq += q(i);
    l1 += std::abs(p(i) - q(i));
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("divergence: distributions must sum to 1");
  return l1;
}

CoverageReport coverage_report(const nnet::Model& m, const Eigen::VectorXd& params,
                               const nnet::Dataset& d, double gamma_a, double diam,
                               const std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>&
                                   source_target) {
  CoverageReport r;
  r.gamma_a = gamma_a;
  r.gamma_th = gamma_theta(m, params, d, gamma_a);
  r.diam = diam;
  r.param_count = m.param_count();
  r.log10_count = covering_log10_count(diam, r.gamma_th, r.param_count);
  if (source_target)
    r.divergence = div_total_variation(source_target->first, source_target->second);
  return r;
}

}  // namespace augflat::duality
