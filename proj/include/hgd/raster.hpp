// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hgd {

/// Raised for every contract violation in the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major 2-D grid.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error("grid dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw Error("grid dimensions must be non-negative");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error("grid data length does not match width x height");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Grid& o) const { return width_ == o.width_ && height_ == o.height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Heights in meters. Non-nodata values are finite and non-negative.
class HeightMap {
 public:
  HeightMap() = default;
  HeightMap(Grid<float> grid, std::optional<float> nodata = std::nullopt);
  HeightMap(int width, int height, std::vector<float> data, std::optional<float> nodata = std::nullopt)
      : HeightMap(Grid<float>(width, height, std::move(data)), nodata) {}

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  std::size_t size() const { return grid_.size(); }
  const Grid<float>& grid() const { return grid_; }
  std::span<const float> values() const { return grid_.values(); }
  float operator[](std::size_t i) const { return grid_[i]; }
  float operator()(int x, int y) const { return grid_(x, y); }
  const std::optional<float>& nodata() const { return nodata_; }
  bool is_nodata(std::size_t i) const;

  bool operator==(const HeightMap&) const = default;

 private:
  Grid<float> grid_;
  std::optional<float> nodata_;
};

/// Log-normalized heights in [0, 1] together with the dataset constant that produced them.
class NormalizedHeightMap {
 public:
  NormalizedHeightMap() = default;
  NormalizedHeightMap(Grid<float> grid, double norm_constant, std::optional<float> nodata = std::nullopt);

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  std::size_t size() const { return grid_.size(); }
  const Grid<float>& grid() const { return grid_; }
  std::span<const float> values() const { return grid_.values(); }
  float operator[](std::size_t i) const { return grid_[i]; }
  double norm_constant() const { return norm_constant_; }
  const std::optional<float>& nodata() const { return nodata_; }
  bool is_nodata(std::size_t i) const;

 private:
  Grid<float> grid_;
  double norm_constant_ = 1.0;
  std::optional<float> nodata_;
};

/// Per-pixel height-hierarchy class indices.
class HierarchyMap {
 public:
  HierarchyMap() = default;
  HierarchyMap(Grid<std::uint8_t> grid, int n_classes);

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  std::size_t size() const { return grid_.size(); }
  int n_classes() const { return n_classes_; }
  const Grid<std::uint8_t>& grid() const { return grid_; }
  std::span<const std::uint8_t> values() const { return grid_.values(); }
  std::uint8_t operator[](std::size_t i) const { return grid_[i]; }
  std::uint8_t operator()(int x, int y) const { return grid_(x, y); }

  bool operator==(const HierarchyMap&) const = default;

 private:
  Grid<std::uint8_t> grid_;
  int n_classes_ = 2;
};

/// Planar (channel-major) multi-band float image, values nominally in [0, 1].
struct Image {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int w, int h, float fill = 0.0f)
      : channels(c), width(w), height(h),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  float& at(int c, int x, int y) { return data[offset(c, x, y)]; }
  float at(int c, int x, int y) const { return data[offset(c, x, y)]; }
  bool operator==(const Image&) const = default;

 private:
  std::size_t offset(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
};

/// Axis-aligned box in continuous pixel coordinates.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double score = 1.0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  /// True when the center of pixel (x, y) lies inside the closed box.
  bool contains_pixel_center(int x, int y) const;
  bool operator==(const BBox&) const = default;
};

using BinaryMask = Grid<std::uint8_t>;
using ProbabilityMask = Grid<float>;
using InstanceMask = std::variant<BinaryMask, ProbabilityMask>;

struct Instance {
  BBox box;
  InstanceMask mask;
};

int mask_width(const InstanceMask& m);
int mask_height(const InstanceMask& m);
/// Mask value at flat index i as a probability in [0, 1].
float mask_value(const InstanceMask& m, std::size_t i);
/// Binarize a probability mask at `> threshold`; binary masks pass through.
BinaryMask to_binary(const InstanceMask& m, float threshold = 0.5f);

/// Scored building instances of one tile produced by one model.
struct InstanceSet {
  std::string tile_id;
  std::string model_id;
  double model_weight = 1.0;
  int width = 0;
  int height = 0;
  std::vector<Instance> instances;

  /// Throws when any mask is misaligned or out of range, or a box is inverted.
  void validate() const;
};

/// Tight pixel bounding box of a mask's support; nullopt when empty.
std::optional<BBox> mask_bounds(const BinaryMask& m);

double iou_box(const BBox& a, const BBox& b);
double iou_mask(const BinaryMask& a, const BinaryMask& b);
std::size_t mask_area(const BinaryMask& m);

/// Column-major run lengths, first run counts zeros.
struct RleRecord {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const RleRecord&) const = default;
};

RleRecord rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleRecord& record);

}  // namespace hgd
