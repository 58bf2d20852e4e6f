// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "augflat/augment.hpp"
#include "augflat/dataset.hpp"
#include "augflat/flatness.hpp"
#include "augflat/loss.hpp"
#include "augflat/model.hpp"
#include "augflat/robustness.hpp"

namespace augflat::harness {

enum class Schedule { Constant, Cosine };

Schedule schedule_from_string(const std::string& s);
std::string to_string(Schedule s);

// lr * (1 + cos(pi t / total)) / 2; equals lr at t = 0 and 0 at t = total.
double cosine_lr(double lr, int t, int total);

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule = Schedule::Cosine;
  int epochs = 100;
  int batch_size = 64;
  std::optional<augment::AugmentationConfig> augmentation;
  uint64_t seed = 0;
  std::string dtype = "f64";  // checkpoint storage width
  nnet::LossKind loss = nnet::LossKind::CrossEntropy;
  double early_stop_loss = 1e-3;  // stop when epoch mean loss drops below; 0 disables
};

void validate(const TrainConfig& cfg);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainResult {
  Eigen::VectorXd params;
  std::vector<double> epoch_loss;  // mean training loss per epoch, on augmented batches
  bool early_stopped = false;
};

// SGD with momentum, classic weight decay added to the gradient, optional
// cosine decay and per-sample augmentation reseeded every epoch. Deterministic
// given cfg.seed. test_mode permits lr = 0 for step-level checks.
TrainResult train(const nnet::Model& m, const nnet::Dataset& train_set, const TrainConfig& cfg,
                  bool test_mode = false);

struct GaussianBlobs {
  int classes = 2;
  int dim = 2;
  double sep = 4.0;  // center distance from origin, unit noise
  int n = 400;
};
struct TwoMoons {
  double noise = 0.1;
  int n = 400;
};
struct MiniImages {
  int classes = 4;  // <= 4 procedural shape families
  int n = 2000;
};

using SyntheticSpec = std::variant<GaussianBlobs, TwoMoons, MiniImages>;

SyntheticSpec synthetic_from_json(const nlohmann::json& j);
nlohmann::json synthetic_to_json(const SyntheticSpec& spec);

nnet::Dataset make_synthetic(const SyntheticSpec& spec, uint64_t seed);

struct SplitDataset {
  nnet::Dataset train;
  nnet::Dataset test;
};

// First 80% / last 20%; synthetic generators interleave classes so both
// halves stay balanced.
SplitDataset split_dataset(const nnet::Dataset& d);

struct Arm {
  std::string name;
  TrainConfig train;
};

struct ExperimentConfig {
  std::string name = "experiment";
  SyntheticSpec dataset = MiniImages{};
  uint64_t dataset_seed = 0;
  std::optional<std::string> dataset_path;  // file input instead of a generator
  nnet::PixelScale scale = nnet::PixelScale::Unit;
  nnet::ModelArch arch;
  std::vector<Arm> arms;  // exactly one must be named "erm"
  std::vector<uint64_t> seeds;
  flatness::FlatnessConfig flatness_cfg;
  std::vector<std::string> attacks;  // attack preset names
  std::vector<double> psa_thresholds = {0.01, 0.05, 0.1, 0.5};
  double psa_gamma_star = 0.05;
  int psa_n = 10000;
};

void validate(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

struct RunRecord {
  std::string arm;
  uint64_t seed = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
  flatness::FlatnessReport flat;
  robustness::RobustnessReport robust;
  std::optional<augment::PsaReport> psa;
  std::string psa_skip_reason;
  std::string checkpoint;
  std::string error;  // nonempty when the run failed; other fields then unset
};

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

// Trains every arm x seed, then evaluates proximal density, flatness and
// robustness per run. Failures are recorded per run and do not stop the
// sweep. Writes records.json, summary.csv and checkpoints under out_dir;
// wall-clock timings go to a separate timings.txt so the report artifacts
// stay byte-identical across runs.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// "0.00" for a tie, otherwise the signed difference to two decimals.
std::string format_delta(double value, double baseline);

void write_reports(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                   const std::string& out_dir);

}  // namespace augflat::harness
