// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "augflat/model.hpp"

namespace augflat::nnet {

nlohmann::json arch_to_json(const ModelArch& a);
ModelArch arch_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelArch arch;
  Eigen::VectorXd params;
  std::string dtype;  // "f32" or "f64"
  uint64_t seed = 0;
};

// Flat little-endian parameter vector at `path`, with a JSON sidecar at
// path + ".json" describing the architecture, dtype, seed and layout.
void save_checkpoint(const std::string& path, const Model& m, const Eigen::VectorXd& params,
                     const std::string& dtype, uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace augflat::nnet
