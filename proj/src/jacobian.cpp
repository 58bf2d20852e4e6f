// SPDX-License-Identifier: Apache-2.0
#include "augflat/jacobian.hpp"

namespace augflat::nnet {

namespace {

void sweep_rows(const Model& m, const Eigen::VectorXd& params, const Eigen::VectorXd& x,
                Eigen::MatrixXd* jx, Eigen::MatrixXd* jtheta) {
  ForwardTrace trace;
  forward(m, params, x, &trace);

  const Eigen::Index c = m.output_dim();
  if (jx) jx->setZero(c, m.input_dim());
  if (jtheta) jtheta->setZero(c, m.param_count());

  Eigen::VectorXd seed = Eigen::VectorXd::Zero(c);
  Eigen::VectorXd dx(m.input_dim());
  Eigen::VectorXd dtheta(m.param_count());
  for (Eigen::Index k = 0; k < c; ++k) {
    seed(k) = 1.0;
    dx.setZero();
    dtheta.setZero();
    backward(m, params, trace, seed, jx ? &dx : nullptr, jtheta ? &dtheta : nullptr);
    if (jx) jx->row(k) = dx.transpose();
    if (jtheta) jtheta->row(k) = dtheta.transpose();
    seed(k) = 0.0;
  }
}

}  // namespace

JacobianPair jacobian_pair(const Model& m, const Eigen::VectorXd& params, const Eigen::VectorXd& x) {
  JacobianPair p;
  sweep_rows(m, params, x, &p.jx, &p.jtheta);
  return p;
}

Eigen::MatrixXd jacobian_input(const Model& m, const Eigen::VectorXd& params,
                               const Eigen::VectorXd& x) {
  Eigen::MatrixXd jx;
  sweep_rows(m, params, x, &jx, nullptr);
  return jx;
}

Eigen::MatrixXd jacobian_params(const Model& m, const Eigen::VectorXd& params,
                                const Eigen::VectorXd& x) {
  Eigen::MatrixXd jtheta;
  sweep_rows(m, params, x, nullptr, &jtheta);
  return jtheta;
}

}  // namespace augflat::nnet
