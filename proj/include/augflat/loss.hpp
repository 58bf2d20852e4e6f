// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "augflat/dataset.hpp"
#include "augflat/model.hpp"

namespace augflat::nnet {

enum class LossKind { CrossEntropy, Mse };

LossKind loss_from_string(const std::string& s);
std::string to_string(LossKind k);

// Cross-entropy is taken over the softmax of the logits; MSE is the mean
// squared deviation from the one-hot target over the output coordinates.
double sample_loss(const Eigen::VectorXd& logits, int label, LossKind kind);
Eigen::VectorXd sample_loss_grad(const Eigen::VectorXd& logits, int label, LossKind kind);

// Argmax class; ties resolve to the lowest index.
int predict(const Eigen::VectorXd& logits);

// Mean loss / summed-gradient helpers over a feature matrix (rows = samples).
double batch_risk(const Model& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& xs,
                  const std::vector<int>& ys, LossKind kind);

// Mean loss and mean parameter gradient in one pass.
double batch_risk_grad(const Model& m, const Eigen::VectorXd& params, const Eigen::MatrixXd& xs,
                       const std::vector<int>& ys, LossKind kind, Eigen::VectorXd& grad);

double dataset_risk(const Model& m, const Eigen::VectorXd& params, const Dataset& d, LossKind kind);

// Misclassification rate in percent.
double dataset_error(const Model& m, const Eigen::VectorXd& params, const Dataset& d);

}  // namespace augflat::nnet
