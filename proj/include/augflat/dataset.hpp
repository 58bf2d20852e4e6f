// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace augflat::nnet {

// Declared pixel range of image-valued features: [0,1] or [0,255].
enum class PixelScale { Unit, Byte };

PixelScale pixel_scale_from_string(const std::string& s);
std::string to_string(PixelScale s);

inline double pixel_max(PixelScale s) { return s == PixelScale::Unit ? 1.0 : 255.0; }

struct ImageGeom {
  int h = 0;
  int w = 0;
  int ch = 0;
  bool valid() const { return h > 0 && w > 0 && ch > 0; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(h) * w * ch; }
};

struct Sample {
  Eigen::VectorXd x;
  int y = 0;
};

struct Dataset {
  std::string name;
  Eigen::Index input_dim = 0;
  int num_classes = 0;
  PixelScale scale = PixelScale::Unit;
  ImageGeom geom;  // zeroed when features are not image-shaped
  std::vector<Sample> samples;

  Eigen::Index size() const { return static_cast<Eigen::Index>(samples.size()); }

  // Shared feature dimension, one label per sample, labels within range.
  void validate() const;

  // Feature matrix with one row per sample, plus the label column.
  void to_matrix(Eigen::MatrixXd& xs, std::vector<int>& ys) const;
};

int label_from_onehot(const Eigen::VectorXd& onehot);

// IDX files in the classic byte-image layout: images under magic 0x00000803
// with dims (n, h, w), labels under 0x00000801 with dims (n). Unit-scale
// datasets are stored as bytes and divided by 255 on load.
Dataset load_idx(const std::string& images_path, const std::string& labels_path, PixelScale scale);
void save_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path);

// Rows of "label,x0,x1,...". Values round-trip through %.17g.
Dataset load_csv(const std::string& path, PixelScale scale);
void save_csv(const Dataset& d, const std::string& path);

// Loads either format based on the path: a ".csv" suffix selects CSV, and any
// other path is treated as an IDX image file whose labels sit next to it at
// path + ".labels".
Dataset load_auto(const std::string& path, PixelScale scale);

}  // namespace augflat::nnet
