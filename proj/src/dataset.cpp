// SPDX-License-Identifier: Apache-2.0
#include "augflat/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace augflat::nnet {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated header");
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

PixelScale pixel_scale_from_string(const std::string& s) {
  if (s == "unit") return PixelScale::Unit;
  if (s == "byte") return PixelScale::Byte;
  throw std::invalid_argument("unknown pixel scale: " + s);
}

std::string to_string(PixelScale s) { return s == PixelScale::Unit ? "unit" : "byte"; }

void Dataset::validate() const {
  if (input_dim < 1) throw std::invalid_argument("dataset: input_dim must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("dataset: num_classes must be >= 1");
  if (geom.valid() && geom.size() != input_dim)
    throw std::invalid_argument("dataset: image geometry does not match input_dim");
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.x.size() != input_dim)
      throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has wrong feature length");
    if (s.y < 0 || s.y >= num_classes)
      throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has label out of range");
    if (!s.x.allFinite())
      throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has non-finite features");
  }
}

void Dataset::to_matrix(Eigen::MatrixXd& xs, std::vector<int>& ys) const {
  xs.resize(size(), input_dim);
  ys.resize(samples.size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    xs.row(i) = samples[static_cast<size_t>(i)].x.transpose();
    ys[static_cast<size_t>(i)] = samples[static_cast<size_t>(i)].y;
  }
}

int label_from_onehot(const Eigen::VectorXd& onehot) {
  int hit = -1;
  for (Eigen::Index i = 0; i < onehot.size(); ++i) {
    if (onehot(i) == 1.0) {
      if (hit >= 0) throw std::invalid_argument("label_from_onehot: multiple ones");
      hit = static_cast<int>(i);
    } else if (onehot(i) != 0.0) {
      throw std::invalid_argument("label_from_onehot: entries must be 0 or 1");
    }
  }
  if (hit < 0) throw std::invalid_argument("label_from_onehot: no one set");
  return hit;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, PixelScale scale) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
  if (read_be32(imgs) != kImageMagic) throw std::runtime_error("idx: bad image magic in " + images_path);
  uint32_t n = read_be32(imgs);
  uint32_t h = read_be32(imgs);
  uint32_t w = read_be32(imgs);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
  if (read_be32(labs) != kLabelMagic) throw std::runtime_error("idx: bad label magic in " + labels_path);
  if (read_be32(labs) != n) throw std::runtime_error("idx: image/label count mismatch");

  Dataset d;
  d.name = images_path;
  d.scale = scale;
  d.geom = ImageGeom{static_cast<int>(h), static_cast<int>(w), 1};
  d.input_dim = d.geom.size();
  d.samples.resize(n);

  const double denom = scale == PixelScale::Unit ? 255.0 : 1.0;
  std::vector<unsigned char> row(static_cast<size_t>(h) * w);
  int max_label = 0;
  for (uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!imgs) throw std::runtime_error("idx: truncated image data");
    Sample& s = d.samples[i];
    s.x.resize(d.input_dim);
    for (size_t j = 0; j < row.size(); ++j) s.x(static_cast<Eigen::Index>(j)) = row[j] / denom;
    char lab = 0;
    labs.read(&lab, 1);
    if (!labs) throw std::runtime_error("idx: truncated label data");
    s.y = static_cast<unsigned char>(lab);
    max_label = std::max(max_label, s.y);
  }
  d.num_classes = max_label + 1;
  d.validate();
  return d;
}

void save_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path) {
  d.validate();
  if (!d.geom.valid() || d.geom.ch != 1)
    throw std::invalid_argument("idx: only single-channel image datasets can be saved");
  if (d.num_classes > 256) throw std::invalid_argument("idx: labels do not fit in a byte");

  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot write " + images_path);
  write_be32(imgs, kImageMagic);
  write_be32(imgs, static_cast<uint32_t>(d.size()));
  write_be32(imgs, static_cast<uint32_t>(d.geom.h));
  write_be32(imgs, static_cast<uint32_t>(d.geom.w));

  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot write " + labels_path);
  write_be32(labs, kLabelMagic);
  write_be32(labs, static_cast<uint32_t>(d.size()));

  const double mul = d.scale == PixelScale::Unit ? 255.0 : 1.0;
  std::vector<unsigned char> row(static_cast<size_t>(d.input_dim));
  for (const Sample& s : d.samples) {
    for (Eigen::Index j = 0; j < d.input_dim; ++j) {
      double v = std::round(s.x(j) * mul);
      row[static_cast<size_t>(j)] = static_cast<unsigned char>(std::min(255.0, std::max(0.0, v)));
    }
    imgs.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    char lab = static_cast<char>(s.y);
    labs.write(&lab, 1);
  }
}

Dataset load_csv(const std::string& path, PixelScale scale) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  Dataset d;
  d.name = path;
  d.scale = scale;
  std::string line;
  int max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 2) throw std::runtime_error("csv: row with fewer than two fields in " + path);
    Sample s;
    s.y = static_cast<int>(vals[0]);
    s.x.resize(static_cast<Eigen::Index>(vals.size()) - 1);
    for (size_t j = 1; j < vals.size(); ++j) s.x(static_cast<Eigen::Index>(j - 1)) = vals[j];
    if (d.input_dim == 0) d.input_dim = s.x.size();
    max_label = std::max(max_label, s.y);
    d.samples.push_back(std::move(s));
  }
  if (d.samples.empty()) throw std::runtime_error("csv: no rows in " + path);
  d.num_classes = max_label + 1;
  d.validate();
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  char buf[40];
  for (const Sample& s : d.samples) {
    out << s.y;
    for (Eigen::Index j = 0; j < d.input_dim; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", s.x(j));
      out << buf;
    }
    out << '\n';
  }
}

Dataset load_auto(const std::string& path, PixelScale scale) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return load_csv(path, scale);
  return load_idx(path, path + ".labels", scale);
}

}  // namespace augflat::nnet
