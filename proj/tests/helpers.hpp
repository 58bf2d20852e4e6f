// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "augflat/dataset.hpp"
#include "augflat/jacobian.hpp"
#include "augflat/loss.hpp"
#include "augflat/model.hpp"
#include "augflat/numerics.hpp"

namespace augflat::test {

inline nnet::ModelArch dense_arch(int input_dim, std::vector<nnet::DenseSpec> layers) {
  nnet::ModelArch a;
  a.input_dim = input_dim;
  a.dense = std::move(layers);
  return a;
}

// Single dense layer without bias: f(x) = W x.
inline nnet::ModelArch linear_arch(int input_dim, int out_dim) {
  return dense_arch(input_dim, {{out_dim, nnet::Activation::Identity, false}});
}

inline nnet::Dataset random_dataset(Eigen::Index n, Eigen::Index dim, int classes, uint64_t seed,
                                    double lo = -1.0, double hi = 1.0) {
  nnet::Dataset d;
  d.name = "random";
  d.input_dim = dim;
  d.num_classes = classes;
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    nnet::Sample s;
    s.x.resize(dim);
    for (Eigen::Index j = 0; j < dim; ++j) s.x[j] = rng.uniform(lo, hi);
    s.y = rng.uniform_int(0, classes - 1);
    d.samples.push_back(std::move(s));
  }
  return d;
}

// Central finite differences of f(x) column by column.
template <typename F>
Eigen::MatrixXd fd_jacobian(F&& f, const Eigen::VectorXd& x, Eigen::Index out_dim,
                            double h = 1e-4) {
  Eigen::MatrixXd j(out_dim, x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return j;
}

template <typename F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& x, double h = 1e-4) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return g;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace augflat::test
