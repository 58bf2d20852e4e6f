// SPDX-License-Identifier: Apache-2.0
#include "augflat/model.hpp"

#include <cmath>
#include <stdexcept>

#include "augflat/numerics.hpp"

namespace augflat::nnet {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline Eigen::Index idx3(int ch, int y, int x, int h, int w) {
  (void)h;
  return (static_cast<Eigen::Index>(ch) * h + y) * w + x;
}

void apply_activation(Activation a, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = activate(a, v(i));
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Model::Model(ModelArch arch) : arch_(std::move(arch)) {
  if (arch_.input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
  if (arch_.dense.empty()) throw std::invalid_argument("model: at least one dense layer required");
  for (const auto& d : arch_.dense)
    if (d.units < 1) throw std::invalid_argument("model: dense units must be >= 1");

  Eigen::Index offset = 0;
  Eigen::Index dense_in = arch_.input_dim;

  if (arch_.conv) {
    const ConvSpec& c = *arch_.conv;
    if (arch_.image_h < 1 || arch_.image_w < 1 || arch_.image_c < 1)
      throw std::invalid_argument("model: conv stage requires image dimensions");
    if (static_cast<Eigen::Index>(arch_.image_h) * arch_.image_w * arch_.image_c != arch_.input_dim)
      throw std::invalid_argument("model: image dimensions do not match input_dim");
    if (c.out_channels < 1 || c.kernel < 1 || c.pool < 1)
      throw std::invalid_argument("model: bad conv spec");
    if (c.kernel > arch_.image_h || c.kernel > arch_.image_w)
      throw std::invalid_argument("model: conv kernel larger than image");
    conv_out_h_ = arch_.image_h - c.kernel + 1;
    conv_out_w_ = arch_.image_w - c.kernel + 1;
    if (conv_out_h_ % c.pool != 0 || conv_out_w_ % c.pool != 0)
      throw std::invalid_argument("model: pool must divide conv output dimensions");
    pool_out_h_ = conv_out_h_ / c.pool;
    pool_out_w_ = conv_out_w_ / c.pool;

    conv_layout_.in_dim = arch_.input_dim;
    conv_layout_.out_dim = static_cast<Eigen::Index>(c.out_channels) * pool_out_h_ * pool_out_w_;
    conv_layout_.w_offset = offset;
    conv_layout_.w_count =
        static_cast<Eigen::Index>(c.out_channels) * arch_.image_c * c.kernel * c.kernel;
    offset += conv_layout_.w_count;
    conv_layout_.b_offset = offset;
    offset += c.out_channels;
    dense_in = conv_layout_.out_dim;
  } else if (arch_.image_h != 0 || arch_.image_w != 0 || arch_.image_c != 0) {
    if (static_cast<Eigen::Index>(arch_.image_h) * arch_.image_w * arch_.image_c != arch_.input_dim)
      throw std::invalid_argument("model: image dimensions do not match input_dim");
  }

  for (const auto& d : arch_.dense) {
    LayerLayout l;
    l.in_dim = dense_in;
    l.out_dim = d.units;
    l.w_offset = offset;
    l.w_count = l.in_dim * l.out_dim;
    offset += l.w_count;
    if (d.bias) {
      l.b_offset = offset;
      offset += l.out_dim;
    }
    dense_layouts_.push_back(l);
    dense_in = d.units;
  }
  param_count_ = offset;
}

Eigen::VectorXd Model::init_params(uint64_t seed) const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(param_count_);
  int layer = 0;
  if (arch_.conv) {
    const ConvSpec& c = *arch_.conv;
    double fan_in = static_cast<double>(arch_.image_c) * c.kernel * c.kernel;
    double fan_out = static_cast<double>(c.out_channels) * c.kernel * c.kernel;
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed_mix(seed, 0x57a97ULL, static_cast<uint64_t>(layer)));
    for (Eigen::Index i = 0; i < conv_layout_.w_count; ++i)
      p(conv_layout_.w_offset + i) = rng.uniform(-limit, limit);
    ++layer;
  }
  for (size_t d = 0; d < arch_.dense.size(); ++d, ++layer) {
    const LayerLayout& l = dense_layouts_[d];
    double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    Rng rng(seed_mix(seed, 0x57a97ULL, static_cast<uint64_t>(layer)));
    for (Eigen::Index i = 0; i < l.w_count; ++i) p(l.w_offset + i) = rng.uniform(-limit, limit);
  }
  return p;
}

namespace {

void check_eval_args(const Model& m, const Eigen::VectorXd& params, Eigen::Index x_size) {
  if (params.size() != m.param_count())
    throw std::invalid_argument("forward: parameter vector has wrong length");
  if (x_size != m.input_dim()) throw std::invalid_argument("forward: input has wrong length");
}

Eigen::VectorXd conv_forward(const Model& m, const Eigen::VectorXd& params, const Eigen::VectorXd& x,
                             ForwardTrace* trace) {
  const ConvSpec& c = *m.arch().conv;
  const int ih = m.arch().image_h, iw = m.arch().image_w, ic = m.arch().image_c;
  const int oh = m.conv_out_h(), ow = m.conv_out_w();
  const int ph = m.pool_out_h(), pw = m.pool_out_w();
  const LayerLayout& L = m.conv_layout();

  Eigen::VectorXd pre(static_cast<Eigen::Index>(c.out_channels) * oh * ow);
  for (int o = 0; o < c.out_channels; ++o) {
    double b = params(L.b_offset + o);
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        double acc = b;
        for (int i = 0; i < ic; ++i)
          for (int dy = 0; dy < c.kernel; ++dy)
            for (int dx = 0; dx < c.kernel; ++dx) {
              Eigen::Index wofs =
                  L.w_offset + ((static_cast<Eigen::Index>(o) * ic + i) * c.kernel + dy) * c.kernel + dx;
              acc += params(wofs) * x(idx3(i, y + dy, xx + dx, ih, iw));
            }
        pre(idx3(o, y, xx, oh, ow)) = acc;
      }
    }
  }

  Eigen::VectorXd post = pre;
  apply_activation(c.act, post);

  Eigen::VectorXd pooled(static_cast<Eigen::Index>(c.out_channels) * ph * pw);
  const double inv_area = 1.0 / (static_cast<double>(c.pool) * c.pool);
  for (int o = 0; o < c.out_channels; ++o)
    for (int y = 0; y < ph; ++y)
      for (int xx = 0; xx < pw; ++xx) {
        double acc = 0.0;
        for (int dy = 0; dy < c.pool; ++dy)
          for (int dx = 0; dx < c.pool; ++dx)
            acc += post(idx3(o, y * c.pool + dy, xx * c.pool + dx, oh, ow));
        pooled(idx3(o, y, xx, ph, pw)) = acc * inv_area;
      }

  if (trace) {
    trace->conv_pre = pre;
    trace->conv_post = post;
    trace->pooled = pooled;
  }
  return pooled;
}

}  // namespace

Eigen::VectorXd forward(const Model& m, const Eigen::VectorXd& params, const Eigen::VectorXd& x,
                        ForwardTrace* trace) {
  check_eval_args(m, params, x.size());
  if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");

  if (trace) {
    trace->input = x;
    trace->conv_pre.resize(0);
    trace->conv_post.resize(0);
    trace->pooled.resize(0);
    trace->pre.clear();
    trace->post.clear();
  }

  Eigen::VectorXd cur = m.has_conv() ? conv_forward(m, params, x, trace) : x;

  for (size_t d = 0; d < m.dense_layouts().size(); ++d) {
    const LayerLayout& l = m.dense_layouts()[d];
    RowMajorMap w(params.data() + l.w_offset, l.out_dim, l.in_dim);
    Eigen::VectorXd z = w * cur;
    if (l.b_offset >= 0) z += params.segment(l.b_offset, l.out_dim);
    Eigen::VectorXd a = z;
    apply_activation(m.arch().dense[d].act, a);
    if (trace) {
      trace->pre.push_back(z);
      trace->post.push_back(a);
    }
    cur = std::move(a);
  }
  return cur;
}

void backward(const Model& m, const Eigen::VectorXd& params, const ForwardTrace& trace,
              const Eigen::VectorXd& out_seed, Eigen::VectorXd* dx, Eigen::VectorXd* dtheta) {
  if (out_seed.size() != m.output_dim())
    throw std::invalid_argument("backward: seed has wrong length");

  Eigen::VectorXd g = out_seed;
  for (size_t d = m.dense_layouts().size(); d-- > 0;) {
    const LayerLayout& l = m.dense_layouts()[d];
    const Eigen::VectorXd& z = trace.pre[d];
    Eigen::VectorXd gz(l.out_dim);
    for (Eigen::Index i = 0; i < l.out_dim; ++i)
      gz(i) = g(i) * activate_grad(m.arch().dense[d].act, z(i));

    const Eigen::VectorXd& in =
        d > 0 ? trace.post[d - 1] : (m.has_conv() ? trace.pooled : trace.input);
    if (dtheta) {
      RowMajorMutMap dw(dtheta->data() + l.w_offset, l.out_dim, l.in_dim);
      dw.noalias() += gz * in.transpose();
      if (l.b_offset >= 0) dtheta->segment(l.b_offset, l.out_dim) += gz;
    }
    RowMajorMap w(params.data() + l.w_offset, l.out_dim, l.in_dim);
    g = w.transpose() * gz;
  }

  if (!m.has_conv()) {
    if (dx) *dx += g;
    return;
  }

  const ConvSpec& c = *m.arch().conv;
  const int ih = m.arch().image_h, iw = m.arch().image_w, ic = m.arch().image_c;
  const int oh = m.conv_out_h(), ow = m.conv_out_w();
  const int ph = m.pool_out_h(), pw = m.pool_out_w();
  const LayerLayout& L = m.conv_layout();
  const double inv_area = 1.0 / (static_cast<double>(c.pool) * c.pool);

  // Un-pool, then peel the activation.
  Eigen::VectorXd gz(static_cast<Eigen::Index>(c.out_channels) * oh * ow);
  for (int o = 0; o < c.out_channels; ++o)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        double gp = g(idx3(o, y / c.pool, xx / c.pool, ph, pw)) * inv_area;
        Eigen::Index at = idx3(o, y, xx, oh, ow);
        gz(at) = gp * activate_grad(c.act, trace.conv_pre(at));
      }

  for (int o = 0; o < c.out_channels; ++o)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        double gv = gz(idx3(o, y, xx, oh, ow));
        if (gv == 0.0) continue;
        if (dtheta) (*dtheta)(L.b_offset + o) += gv;
        for (int i = 0; i < ic; ++i)
          for (int dy = 0; dy < c.kernel; ++dy)
            for (int dxk = 0; dxk < c.kernel; ++dxk) {
              Eigen::Index wofs =
                  L.w_offset + ((static_cast<Eigen::Index>(o) * ic + i) * c.kernel + dy) * c.kernel + dxk;
              if (dtheta) (*dtheta)(wofs) += gv * trace.input(idx3(i, y + dy, xx + dxk, ih, iw));
              if (dx) (*dx)(idx3(i, y + dy, xx + dxk, ih, iw)) += gv * params(wofs);
            }
      }
}

Eigen::MatrixXd forward_batch_traced(const Model& m, const Eigen::VectorXd& params,
                                     const Eigen::MatrixXd& xs, BatchTrace& trace) {
  if (m.has_conv())
    throw std::invalid_argument("forward_batch_traced: conv models use the per-sample path");
  check_eval_args(m, params, xs.cols());
  if (!xs.allFinite()) throw std::invalid_argument("forward: non-finite input");

  trace.input = xs;
  trace.pre.clear();
  trace.post.clear();

  Eigen::MatrixXd cur = xs;
  for (size_t d = 0; d < m.dense_layouts().size(); ++d) {
    const LayerLayout& l = m.dense_layouts()[d];
    RowMajorMap w(params.data() + l.w_offset, l.out_dim, l.in_dim);
    Eigen::MatrixXd z = cur * w.transpose();
    if (l.b_offset >= 0) z.rowwise() += params.segment(l.b_offset, l.out_dim).transpose();
    Eigen::MatrixXd a = z;
    Activation act = m.arch().dense[d].act;
    if (act != Activation::Identity)
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = activate(act, a.data()[i]);
    trace.pre.push_back(std::move(z));
    trace.post.push_back(a);
    cur = std::move(a);
  }
  return cur;
}

Eigen::MatrixXd forward_batch(const Model& m, const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& xs) {
  if (!m.has_conv()) {
    BatchTrace t;
    return forward_batch_traced(m, params, xs, t);
  }
  check_eval_args(m, params, xs.cols());
  Eigen::MatrixXd out(xs.rows(), m.output_dim());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    out.row(i) = forward(m, params, xs.row(i).transpose()).transpose();
  return out;
}

void backward_batch(const Model& m, const Eigen::VectorXd& params, const BatchTrace& trace,
                    const Eigen::MatrixXd& out_seeds, Eigen::MatrixXd* dxs,
                    Eigen::VectorXd* dtheta) {
  if (m.has_conv())
    throw std::invalid_argument("backward_batch: conv models use the per-sample path");
  if (out_seeds.cols() != m.output_dim() || out_seeds.rows() != trace.input.rows())
    throw std::invalid_argument("backward_batch: seed matrix has wrong shape");

  Eigen::MatrixXd g = out_seeds;
  for (size_t d = m.dense_layouts().size(); d-- > 0;) {
    const LayerLayout& l = m.dense_layouts()[d];
    Activation act = m.arch().dense[d].act;
    Eigen::MatrixXd gz = g;
    if (act != Activation::Identity) {
      const Eigen::MatrixXd& z = trace.pre[d];
      for (Eigen::Index i = 0; i < gz.size(); ++i)
        gz.data()[i] *= activate_grad(act, z.data()[i]);
    }
    const Eigen::MatrixXd& in = d > 0 ? trace.post[d - 1] : trace.input;
    if (dtheta) {
      RowMajorMutMap dw(dtheta->data() + l.w_offset, l.out_dim, l.in_dim);
      dw.noalias() += gz.transpose() * in;
      if (l.b_offset >= 0)
        dtheta->segment(l.b_offset, l.out_dim) += gz.colwise().sum().transpose();
    }
    RowMajorMap w(params.data() + l.w_offset, l.out_dim, l.in_dim);
    g = gz * w;
  }
  if (dxs) *dxs = g;
}

}  // namespace augflat::nnet
