// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "augflat/harness.hpp"
#include "augflat/numerics.hpp"

namespace augflat::harness {

namespace {

constexpr uint64_t kPermStream = 0x9e4;
constexpr uint64_t kAugStream = 0xa46;

}  // namespace

Schedule schedule_from_string(const std::string& s) {
  if (s == "constant") return Schedule::Constant;
  if (s == "cosine") return Schedule::Cosine;
  throw std::invalid_argument("unknown schedule: " + s);
}

std::string to_string(Schedule s) { return s == Schedule::Constant ? "constant" : "cosine"; }

double cosine_lr(double lr, int t, int total) {
  return lr * (1.0 + std::cos(M_PI * static_cast<double>(t) / static_cast<double>(total))) / 2.0;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.dtype != "f32" && cfg.dtype != "f64")
    throw std::invalid_argument("train: dtype must be f32 or f64");
  if (cfg.augmentation) augment::validate(*cfg.augmentation);
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["schedule"] = to_string(cfg.schedule);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  if (cfg.augmentation) j["augmentation"] = augment::config_to_json(*cfg.augmentation);
  j["seed"] = cfg.seed;
  j["dtype"] = cfg.dtype;
  j["loss"] = nnet::to_string(cfg.loss);
  j["early_stop_loss"] = cfg.early_stop_loss;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.lr = j.value("lr", cfg.lr);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  if (j.contains("schedule")) cfg.schedule = schedule_from_string(j["schedule"].get<std::string>());
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("augmentation") && !j["augmentation"].is_null())
    cfg.augmentation = augment::config_from_json(j["augmentation"]);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.dtype = j.value("dtype", cfg.dtype);
  if (j.contains("loss")) cfg.loss = nnet::loss_from_string(j["loss"].get<std::string>());
  cfg.early_stop_loss = j.value("early_stop_loss", cfg.early_stop_loss);
  validate(cfg);
  return cfg;
}

TrainResult train(const nnet::Model& m, const nnet::Dataset& train_set, const TrainConfig& cfg,
                  bool test_mode) {
  if (!test_mode) validate(cfg);
  train_set.validate();
  if (train_set.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (train_set.input_dim != m.input_dim())
    throw std::invalid_argument("train: dataset does not match model input");

  const Eigen::Index n = train_set.size();
  TrainResult res;
  res.params = m.init_params(cfg.seed);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(m.param_count());
  Eigen::VectorXd grad(m.param_count());

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr_t = cfg.schedule == Schedule::Cosine ? cosine_lr(cfg.lr, epoch, cfg.epochs) : cfg.lr;
    Rng perm_rng(seed_mix(cfg.seed, kPermStream, static_cast<uint64_t>(epoch)));
    perm_rng.shuffle(order);

    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(bsz, m.input_dim());
      std::vector<int> yb(static_cast<size_t>(bsz));
      for (Eigen::Index r = 0; r < bsz; ++r) {
        Eigen::Index i = order[static_cast<size_t>(start + r)];
        const nnet::Sample& s = train_set.samples[static_cast<size_t>(i)];
        if (cfg.augmentation) {
          xb.row(r) = augment::apply(*cfg.augmentation, s.x, train_set.geom, train_set.scale,
                                     seed_mix(cfg.seed, kAugStream, static_cast<uint64_t>(epoch),
                                              static_cast<uint64_t>(i)))
                          .transpose();
        } else {
          xb.row(r) = s.x.transpose();
        }
        yb[static_cast<size_t>(r)] = s.y;
      }

      double batch_loss = nnet::batch_risk_grad(m, res.params, xb, yb, cfg.loss, grad);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "train: diverged at epoch " << epoch << " (non-finite loss); epoch losses so far:";
        for (double l : res.epoch_loss) msg << ' ' << l;
        throw std::runtime_error(msg.str());
      }
      if (cfg.weight_decay > 0.0) grad += cfg.weight_decay * res.params;
      velocity = cfg.momentum * velocity + grad;
      res.params -= lr_t * velocity;
      loss_sum += batch_loss * static_cast<double>(bsz);
    }

    res.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    if (cfg.early_stop_loss > 0.0 && res.epoch_loss.back() < cfg.early_stop_loss) {
      res.early_stopped = true;
      break;
    }
  }
  return res;
}

}  // namespace augflat::harness
