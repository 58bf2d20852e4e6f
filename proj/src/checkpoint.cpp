// SPDX-License-Identifier: Apache-2.0
#include "augflat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace augflat::nnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, const Eigen::VectorXd& params) {
  std::vector<T> buf(static_cast<size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i)
    buf[static_cast<size_t>(i)] = static_cast<T>(params(i));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(T)));
}

template <typename T>
Eigen::VectorXd read_raw(std::istream& in, Eigen::Index n) {
  std::vector<T> buf(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(T)));
  if (!in) throw std::runtime_error("checkpoint: truncated parameter file");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<double>(buf[static_cast<size_t>(i)]);
  return v;
}

}  // namespace

nlohmann::json arch_to_json(const ModelArch& a) {
  nlohmann::json j;
  j["input_dim"] = a.input_dim;
  if (a.image_h > 0) j["image"] = {a.image_h, a.image_w, a.image_c};
  if (a.conv) {
    j["conv"] = {{"channels", a.conv->out_channels},
                 {"kernel", a.conv->kernel},
                 {"act", to_string(a.conv->act)},
                 {"pool", a.conv->pool}};
  }
  j["dense"] = nlohmann::json::array();
  for (const auto& d : a.dense)
    j["dense"].push_back({{"units", d.units}, {"act", to_string(d.act)}, {"bias", d.bias}});
  return j;
}

ModelArch arch_from_json(const nlohmann::json& j) {
  ModelArch a;
  a.input_dim = j.at("input_dim").get<int>();
  if (j.contains("image")) {
    const auto& im = j.at("image");
    if (!im.is_array() || im.size() != 3)
      throw std::invalid_argument("arch: image must be [h, w, channels]");
    a.image_h = im[0].get<int>();
    a.image_w = im[1].get<int>();
    a.image_c = im[2].get<int>();
  }
  if (j.contains("conv")) {
    const auto& c = j.at("conv");
    ConvSpec spec;
    spec.out_channels = c.at("channels").get<int>();
    spec.kernel = c.at("kernel").get<int>();
    spec.act = activation_from_string(c.value("act", std::string("relu")));
    spec.pool = c.value("pool", 1);
    a.conv = spec;
  }
  for (const auto& d : j.at("dense")) {
    DenseSpec spec;
    spec.units = d.at("units").get<int>();
    spec.act = activation_from_string(d.value("act", std::string("identity")));
    spec.bias = d.value("bias", true);
    a.dense.push_back(spec);
  }
  return a;
}

void save_checkpoint(const std::string& path, const Model& m, const Eigen::VectorXd& params,
                     const std::string& dtype, uint64_t seed) {
  if (params.size() != m.param_count())
    throw std::invalid_argument("checkpoint: parameter vector has wrong length");
  if (dtype != "f32" && dtype != "f64")
    throw std::invalid_argument("checkpoint: dtype must be f32 or f64");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  if (dtype == "f32")
    write_raw<float>(out, params);
  else
    write_raw<double>(out, params);
  out.close();

  nlohmann::json side;
  side["arch"] = arch_to_json(m.arch());
  side["dtype"] = dtype;
  side["seed"] = seed;
  side["layout"] = "layer-major";
  side["param_count"] = m.param_count();
  std::ofstream meta(path + ".json");
  if (!meta) throw std::runtime_error("checkpoint: cannot write " + path + ".json");
  meta << side.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream meta(path + ".json");
  if (!meta) throw std::runtime_error("checkpoint: cannot open " + path + ".json");
  nlohmann::json side = nlohmann::json::parse(meta);

  Checkpoint ck;
  ck.arch = arch_from_json(side.at("arch"));
  ck.dtype = side.at("dtype").get<std::string>();
  ck.seed = side.value("seed", 0ULL);
  if (side.value("layout", std::string("layer-major")) != "layer-major")
    throw std::runtime_error("checkpoint: unsupported parameter layout");

  Model m{ck.arch};
  Eigen::Index n = m.param_count();
  if (side.contains("param_count") && side["param_count"].get<Eigen::Index>() != n)
    throw std::runtime_error("checkpoint: parameter count does not match architecture");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  if (ck.dtype == "f32")
    ck.params = read_raw<float>(in, n);
  else if (ck.dtype == "f64")
    ck.params = read_raw<double>(in, n);
  else
    throw std::runtime_error("checkpoint: unknown dtype " + ck.dtype);
  return ck;
}

}  // namespace augflat::nnet
