// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace augflat::nnet {

enum class Activation { Identity, Relu, Tanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
  }
  return z;
}

// Derivative with respect to the pre-activation. ReLU uses subgradient 0 at 0.
inline double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

struct DenseSpec {
  int units = 0;
  Activation act = Activation::Identity;
  bool bias = true;
};

// Single valid convolution (stride 1) followed by activation and average
// pooling with a pool x pool window at stride pool. Inputs are laid out as
// channel-major planes, each plane row-major.
struct ConvSpec {
  int out_channels = 0;
  int kernel = 0;
  Activation act = Activation::Relu;
  int pool = 1;
};

struct ModelArch {
  int input_dim = 0;
  int image_h = 0;
  int image_w = 0;
  int image_c = 0;
  std::optional<ConvSpec> conv;
  std::vector<DenseSpec> dense;
};

// Parameter slice of one layer inside the flat layer-major vector. Weights are
// row-major with the output index major; the bias block follows the weights.
struct LayerLayout {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  Eigen::Index w_offset = 0;
  Eigen::Index w_count = 0;
  Eigen::Index b_offset = -1;  // -1 when the layer has no bias
};

class Model {
 public:
  explicit Model(ModelArch arch);

  const ModelArch& arch() const { return arch_; }
  Eigen::Index input_dim() const { return arch_.input_dim; }
  Eigen::Index output_dim() const { return arch_.dense.back().units; }
  Eigen::Index param_count() const { return param_count_; }
  bool has_conv() const { return arch_.conv.has_value(); }

  // Geometry of the conv stage; valid only when has_conv().
  int conv_out_h() const { return conv_out_h_; }
  int conv_out_w() const { return conv_out_w_; }
  int pool_out_h() const { return pool_out_h_; }
  int pool_out_w() const { return pool_out_w_; }
  const LayerLayout& conv_layout() const { return conv_layout_; }

  // Dense layer layouts, in forward order.
  const std::vector<LayerLayout>& dense_layouts() const { return dense_layouts_; }

  // Glorot-uniform weights, zero biases, reproducible from the seed alone.
  Eigen::VectorXd init_params(uint64_t seed) const;

 private:
  ModelArch arch_;
  Eigen::Index param_count_ = 0;
  int conv_out_h_ = 0, conv_out_w_ = 0, pool_out_h_ = 0, pool_out_w_ = 0;
  LayerLayout conv_layout_;
  std::vector<LayerLayout> dense_layouts_;
};

// Per-sample activations recorded during a forward pass; consumed by backward.
struct ForwardTrace {
  Eigen::VectorXd input;
  Eigen::VectorXd conv_pre;   // empty when the model has no conv stage
  Eigen::VectorXd conv_post;
  Eigen::VectorXd pooled;
  std::vector<Eigen::VectorXd> pre;
  std::vector<Eigen::VectorXd> post;
};

Eigen::VectorXd forward(const Model& m, const Eigen::VectorXd& params, const Eigen::VectorXd& x,
                        ForwardTrace* trace = nullptr);

// Rows are samples. Dense-only models run layer-level GEMMs; conv models fall
// back to a per-sample loop.
Eigen::MatrixXd forward_batch(const Model& m, const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& xs);

// Reverse sweep from a seed vector g = d(scalar)/d(output). Adds into *dx and
// *dtheta when non-null; callers zero them.
void backward(const Model& m, const Eigen::VectorXd& params, const ForwardTrace& trace,
              const Eigen::VectorXd& out_seed, Eigen::VectorXd* dx, Eigen::VectorXd* dtheta);

// Batched activations for dense-only models; rows are samples.
struct BatchTrace {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

Eigen::MatrixXd forward_batch_traced(const Model& m, const Eigen::VectorXd& params,
                                     const Eigen::MatrixXd& xs, BatchTrace& trace);

// Reverse sweep for a whole batch of seed rows; adds the summed parameter
// gradient into *dtheta and writes per-sample input gradients into *dxs rows
// when requested. Dense-only.
void backward_batch(const Model& m, const Eigen::VectorXd& params, const BatchTrace& trace,
                    const Eigen::MatrixXd& out_seeds, Eigen::MatrixXd* dxs,
                    Eigen::VectorXd* dtheta);

}  // namespace augflat::nnet
