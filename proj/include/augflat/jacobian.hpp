// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "augflat/model.hpp"

namespace augflat::nnet {

// Output Jacobians at a point: jx is d f / d x (c x n), jtheta is
// d f / d theta (c x p). Rows come from per-output reverse sweeps over a
// shared forward trace, so requesting the pair costs one forward pass.
struct JacobianPair {
  Eigen::MatrixXd jx;
  Eigen::MatrixXd jtheta;
};

JacobianPair jacobian_pair(const Model& m, const Eigen::VectorXd& params, const Eigen::VectorXd& x);

Eigen::MatrixXd jacobian_input(const Model& m, const Eigen::VectorXd& params,
                               const Eigen::VectorXd& x);

Eigen::MatrixXd jacobian_params(const Model& m, const Eigen::VectorXd& params,
                                const Eigen::VectorXd& x);

}  // namespace augflat::nnet
