// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <stdexcept>

#include "augflat/harness.hpp"
#include "augflat/numerics.hpp"

namespace augflat::harness {

namespace {

constexpr uint64_t kSampleStream = 0xd5;

void paint_block(Eigen::VectorXd& img, Rng& rng, double base) {
  int y0 = static_cast<int>(rng.uniform_int(1, 3));
  int x0 = static_cast<int>(rng.uniform_int(1, 3));
  int h = static_cast<int>(rng.uniform_int(3, 4));
  int w = static_cast<int>(rng.uniform_int(3, 4));
  for (int y = y0; y < std::min(8, y0 + h); ++y)
    for (int x = x0; x < std::min(8, x0 + w); ++x)
      img(y * 8 + x) = std::min(1.0, std::max(0.0, base + rng.uniform(-0.08, 0.08)));
}

void paint_disc(Eigen::VectorXd& img, Rng& rng, double base) {
  double cy = rng.uniform(3.0, 4.0);
  double cx = rng.uniform(3.0, 4.0);
  double r = rng.uniform(2.0, 3.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
        img(y * 8 + x) = std::min(1.0, std::max(0.0, base + rng.uniform(-0.08, 0.08)));
}

void paint_bars(Eigen::VectorXd& img, Rng& rng, double base) {
  int offset = static_cast<int>(rng.uniform_int(0, 1));
  for (int y = offset; y < 8; y += 2)
    for (int x = 1; x < 7; ++x)
      img(y * 8 + x) = std::min(1.0, std::max(0.0, base + rng.uniform(-0.08, 0.08)));
}

void paint_cross(Eigen::VectorXd& img, Rng& rng, double base) {
  int shift = static_cast<int>(rng.uniform_int(-1, 1));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (y - x == shift || y + x == 7 + shift)
        img(y * 8 + x) = std::min(1.0, std::max(0.0, base + rng.uniform(-0.08, 0.08)));
}

nnet::Dataset make_blobs(const GaussianBlobs& spec, uint64_t seed) {
  if (spec.classes < 2 || spec.dim < 1 || spec.classes > 2 * spec.dim || !(spec.sep > 0.0) ||
      spec.n < spec.classes)
    throw std::invalid_argument("make_synthetic: bad gaussian_blobs spec");
  nnet::Dataset d;
  d.name = "gaussian_blobs";
  d.input_dim = spec.dim;
  d.num_classes = spec.classes;
  d.samples.resize(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    Rng rng(seed_mix(seed, kSampleStream, static_cast<uint64_t>(i)));
    int label = i % spec.classes;
    Eigen::VectorXd x = rng.normal_vector(spec.dim);
    int axis = label % spec.dim;
    x(axis) += label < spec.dim ? spec.sep : -spec.sep;
    d.samples[static_cast<size_t>(i)] = nnet::Sample{std::move(x), label};
  }
  return d;
}

nnet::Dataset make_moons(const TwoMoons& spec, uint64_t seed) {
  if (!(spec.noise >= 0.0) || spec.n < 2)
    throw std::invalid_argument("make_synthetic: bad two_moons spec");
  nnet::Dataset d;
  d.name = "two_moons";
  d.input_dim = 2;
  d.num_classes = 2;
  d.samples.resize(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    Rng rng(seed_mix(seed, kSampleStream, static_cast<uint64_t>(i)));
    int label = i % 2;
    double t = rng.uniform(0.0, M_PI);
    Eigen::VectorXd x(2);
    if (label == 0) {
      x << std::cos(t), std::sin(t);
    } else {
      x << 1.0 - std::cos(t), 0.5 - std::sin(t);
    }
    x += spec.noise * rng.normal_vector(2);
    d.samples[static_cast<size_t>(i)] = nnet::Sample{std::move(x), label};
  }
  return d;
}

nnet::Dataset make_mini_images(const MiniImages& spec, uint64_t seed) {
  if (spec.classes < 2 || spec.classes > 4 || spec.n < spec.classes)
    throw std::invalid_argument("make_synthetic: bad mini_images spec");
  nnet::Dataset d;
  d.name = "mini_images";
  d.input_dim = 64;
  d.num_classes = spec.classes;
  d.scale = nnet::PixelScale::Unit;
  d.geom = nnet::ImageGeom{8, 8, 1};
  d.samples.resize(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    Rng rng(seed_mix(seed, kSampleStream, static_cast<uint64_t>(i)));
    int label = i % spec.classes;
    Eigen::VectorXd img(64);
    for (int p = 0; p < 64; ++p) img(p) = rng.uniform(0.0, 0.04);
    double base = rng.uniform(0.6, 1.0);
    switch (label) {
      case 0: paint_block(img, rng, base); break;
      case 1: paint_disc(img, rng, base); break;
      case 2: paint_bars(img, rng, base); break;
      default: paint_cross(img, rng, base); break;
    }
    d.samples[static_cast<size_t>(i)] = nnet::Sample{std::move(img), label};
  }
  return d;
}

}  // namespace

SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian_blobs") {
    GaussianBlobs s;
    s.classes = j.value("classes", s.classes);
    s.dim = j.value("dim", s.dim);
    s.sep = j.value("sep", s.sep);
    s.n = j.value("n", s.n);
    return s;
  }
  if (kind == "two_moons") {
    TwoMoons s;
    s.noise = j.value("noise", s.noise);
    s.n = j.value("n", s.n);
    return s;
  }
  if (kind == "mini_images") {
    MiniImages s;
    s.classes = j.value("classes", s.classes);
    s.n = j.value("n", s.n);
    return s;
  }
  throw std::invalid_argument("make_synthetic: unknown kind " + kind);
}

nlohmann::json synthetic_to_json(const SyntheticSpec& spec) {
  struct ToJson {
    nlohmann::json operator()(const GaussianBlobs& s) const {
      return {{"kind", "gaussian_blobs"}, {"classes", s.classes}, {"dim", s.dim}, {"sep", s.sep},
              {"n", s.n}};
    }
    nlohmann::json operator()(const TwoMoons& s) const {
      return {{"kind", "two_moons"}, {"noise", s.noise}, {"n", s.n}};
    }
    nlohmann::json operator()(const MiniImages& s) const {
      return {{"kind", "mini_images"}, {"classes", s.classes}, {"n", s.n}};
    }
  };
  return std::visit(ToJson{}, spec);
}

nnet::Dataset make_synthetic(const SyntheticSpec& spec, uint64_t seed) {
  nnet::Dataset d = std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianBlobs>) return make_blobs(s, seed);
        if constexpr (std::is_same_v<T, TwoMoons>) return make_moons(s, seed);
        if constexpr (std::is_same_v<T, MiniImages>) return make_mini_images(s, seed);
      },
      spec);
  d.validate();
  return d;
}

SplitDataset split_dataset(const nnet::Dataset& d) {
  Eigen::Index n_train = d.size() * 8 / 10;
  if (n_train < 1 || n_train >= d.size())
    throw std::invalid_argument("split_dataset: dataset too small for an 80/20 split");
  SplitDataset out;
  out.train = d;
  out.test = d;
  out.train.samples.assign(d.samples.begin(), d.samples.begin() + n_train);
  out.test.samples.assign(d.samples.begin() + n_train, d.samples.end());
  out.train.name = d.name + "/train";
  out.test.name = d.name + "/test";
  return out;
}

}  // namespace augflat::harness
