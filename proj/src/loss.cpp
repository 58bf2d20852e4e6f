// SPDX-License-Identifier: Apache-2.0
#include "augflat/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "augflat/numerics.hpp"

namespace augflat::nnet {

namespace {

void check_label(Eigen::Index c, int label) {
  if (label < 0 || label >= c) throw std::invalid_argument("loss: label out of range");
}

}  // namespace

LossKind loss_from_string(const std::string& s) {
  if (s == "ce") return LossKind::CrossEntropy;
  if (s == "mse") return LossKind::Mse;
  throw std::invalid_argument("unknown loss: " + s);
}

std::string to_string(LossKind k) { return k == LossKind::CrossEntropy ? "ce" : "mse"; }

double sample_loss(const Eigen::VectorXd& logits, int label, LossKind kind) {
  check_label(logits.size(), label);
  if (kind == LossKind::CrossEntropy) {
    double m = logits.maxCoeff();
    double s = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) s += std::exp(logits(i) - m);
    return m + std::log(s) - logits(label);
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double t = i == label ? 1.0 : 0.0;
    acc += (logits(i) - t) * (logits(i) - t);
  }
  return acc / static_cast<double>(logits.size());
}

Eigen::VectorXd sample_loss_grad(const Eigen::VectorXd& logits, int label, LossKind kind) {
  check_label(logits.size(), label);
  Eigen::VectorXd g(logits.size());
  if (kind == LossKind::CrossEntropy) {
    double m = logits.maxCoeff();
    double s = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      g(i) = std::exp(logits(i) - m);
      s += g(i);
    }
    g /= s;
    g(label) -= 1.0;
    return g;
  }
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double t = i == label ? 1.0 : 0.0;
    g(i) = 2.0 * (logits(i) - t) / static_cast<double>(logits.size());
  }
  return g;
}

int predict(const Eigen::VectorXd& logits) {
  int best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits(i) > logits(best)) best = static_cast<int>(i);
  return best;
}

double batch_risk(const Model& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& xs,
                  const std::vector<int>& ys, LossKind kind) {
  if (static_cast<size_t>(xs.rows()) != ys.size())
    throw std::invalid_argument("batch_risk: feature/label count mismatch");
  Eigen::MatrixXd logits = forward_batch(m, params, xs);
  std::vector<double> losses(static_cast<size_t>(xs.rows()));
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    losses[static_cast<size_t>(i)] =
        sample_loss(logits.row(i).transpose(), ys[static_cast<size_t>(i)], kind);
  return pairwise_mean(losses);
}

double batch_risk_grad(const Model& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& xs,
                       const std::vector<int>& ys, LossKind kind, Eigen::VectorXd& grad) {
  if (static_cast<size_t>(xs.rows()) != ys.size())
    throw std::invalid_argument("batch_risk_grad: feature/label count mismatch");
  const double inv_n = 1.0 / static_cast<double>(xs.rows());
  grad = Eigen::VectorXd::Zero(m.param_count());

  if (!m.has_conv()) {
    BatchTrace trace;
    Eigen::MatrixXd logits = forward_batch_traced(m, params, xs, trace);
    std::vector<double> losses(static_cast<size_t>(xs.rows()));
    Eigen::MatrixXd seeds(xs.rows(), m.output_dim());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      int y = ys[static_cast<size_t>(i)];
      losses[static_cast<size_t>(i)] = sample_loss(logits.row(i).transpose(), y, kind);
      seeds.row(i) = sample_loss_grad(logits.row(i).transpose(), y, kind).transpose() * inv_n;
    }
    backward_batch(m, params, trace, seeds, nullptr, &grad);
    return pairwise_mean(losses);
  }

  std::vector<double> losses(static_cast<size_t>(xs.rows()));
  ForwardTrace trace;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    int y = ys[static_cast<size_t>(i)];
    Eigen::VectorXd logits = forward(m, params, xs.row(i).transpose(), &trace);
    losses[static_cast<size_t>(i)] = sample_loss(logits, y, kind);
    Eigen::VectorXd seed = sample_loss_grad(logits, y, kind) * inv_n;
    backward(m, params, trace, seed, nullptr, &grad);
  }
  return pairwise_mean(losses);
}

double dataset_risk(const Model& m, const Eigen::VectorXd& params, const Dataset& d, LossKind kind) {
  Eigen::MatrixXd xs;
  std::vector<int> ys;
  d.to_matrix(xs, ys);
  return batch_risk(m, params, xs, ys, kind);
}

double dataset_error(const Model& m, const Eigen::VectorXd& params, const Dataset& d) {
  if (d.size() == 0) throw std::invalid_argument("dataset_error: empty dataset");
  Eigen::MatrixXd xs;
  std::vector<int> ys;
  d.to_matrix(xs, ys);
  Eigen::MatrixXd logits = forward_batch(m, params, xs);
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    if (predict(logits.row(i).transpose()) != ys[static_cast<size_t>(i)]) ++wrong;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(xs.rows());
}

}  // namespace augflat::nnet
