// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/raster.hpp"

#include <algorithm>
#include <cmath>

namespace hgd {

namespace {

bool matches_nodata(float v, const std::optional<float>& nodata) {
  if (!nodata) return false;
  if (std::isnan(*nodata)) return std::isnan(v);
  return v == *nodata;
}

}  // namespace

HeightMap::HeightMap(Grid<float> grid, std::optional<float> nodata)
    : grid_(std::move(grid)), nodata_(nodata) {
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const float v = grid_[i];
    if (matches_nodata(v, nodata_)) continue;
    if (!std::isfinite(v) || v < 0.0f) {
      throw Error("height map values must be finite and >= 0 (pixel " + std::to_string(i) + ")");
    }
  }
}

bool HeightMap::is_nodata(std::size_t i) const { return matches_nodata(grid_[i], nodata_); }

NormalizedHeightMap::NormalizedHeightMap(Grid<float> grid, double norm_constant, std::optional<float> nodata)
    : grid_(std::move(grid)), norm_constant_(norm_constant), nodata_(nodata) {
  if (!(norm_constant_ > 0.0) || !std::isfinite(norm_constant_)) {
    throw Error("norm_constant must be finite and > 0");
  }
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const float v = grid_[i];
    if (matches_nodata(v, nodata_)) continue;
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw Error("normalized heights must lie in [0, 1] (pixel " + std::to_string(i) + ")");
    }
  }
}

bool NormalizedHeightMap::is_nodata(std::size_t i) const { return matches_nodata(grid_[i], nodata_); }

HierarchyMap::HierarchyMap(Grid<std::uint8_t> grid, int n_classes)
    : grid_(std::move(grid)), n_classes_(n_classes) {
  if (n_classes < 2 || n_classes > 256) throw Error("n_classes must be in [2, 256]");
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (grid_[i] >= n_classes) throw Error("hierarchy class index out of range");
  }
}

bool BBox::contains_pixel_center(int x, int y) const {
  const double cx = x + 0.5;
  const double cy = y + 0.5;
  return cx >= x_min && cx <= x_max && cy >= y_min && cy <= y_max;
}

int mask_width(const InstanceMask& m) {
  return std::visit([](const auto& g) { return g.width(); }, m);
}

int mask_height(const InstanceMask& m) {
  return std::visit([](const auto& g) { return g.height(); }, m);
}

float mask_value(const InstanceMask& m, std::size_t i) {
  if (const auto* b = std::get_if<BinaryMask>(&m)) return (*b)[i] ? 1.0f : 0.0f;
  return std::get<ProbabilityMask>(m)[i];
}

BinaryMask to_binary(const InstanceMask& m, float threshold) {
  if (const auto* b = std::get_if<BinaryMask>(&m)) return *b;
  const auto& p = std::get<ProbabilityMask>(m);
  BinaryMask out(p.width(), p.height());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > threshold ? 1 : 0;
  return out;
}

void InstanceSet::validate() const {
  if (width < 0 || height < 0) throw Error("instance set has negative dimensions");
  if (!(model_weight >= 0.0) || !std::isfinite(model_weight)) {
    throw Error("model_weight must be finite and >= 0");
  }
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& inst = instances[k];
    const std::string where = tile_id + "/" + model_id + "#" + std::to_string(k);
    if (!inst.box.valid()) throw Error("inverted bounding box at " + where);
    if (!(inst.box.score >= 0.0 && inst.box.score <= 1.0)) throw Error("score outside [0,1] at " + where);
    if (mask_width(inst.mask) != width || mask_height(inst.mask) != height) {
      throw Error("mask dimensions differ from tile at " + where);
    }
    if (const auto* b = std::get_if<BinaryMask>(&inst.mask)) {
      for (auto v : b->values()) {
        if (v > 1) throw Error("binary mask holds a value other than 0/1 at " + where);
      }
    } else {
      for (auto v : std::get<ProbabilityMask>(inst.mask).values()) {
        if (!(v >= 0.0f && v <= 1.0f)) throw Error("probability mask outside [0,1] at " + where);
      }
    }
  }
}

std::optional<BBox> mask_bounds(const BinaryMask& m) {
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return BBox{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
              static_cast<double>(y1 + 1), 1.0};
}

double iou_box(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iou_mask(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error("iou_mask: mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += (pa && pb);
    uni += (pa || pb);
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t mask_area(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

RleRecord rle_encode(const BinaryMask& mask) {
  RleRecord rec;
  rec.height = mask.height();
  rec.width = mask.width();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const std::uint8_t v = mask(x, y);
      if (v > 1) throw Error("rle_encode: mask holds a value other than 0/1");
      if (v != current) {
        rec.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rec.counts.push_back(run);
  return rec;
}

BinaryMask rle_decode(const RleRecord& record) {
  if (record.height < 0 || record.width < 0) throw Error("rle_decode: negative size");
  const std::uint64_t total = static_cast<std::uint64_t>(record.height) * static_cast<std::uint64_t>(record.width);
  std::uint64_t sum = 0;
  for (auto c : record.counts) sum += c;
  if (sum != total) {
    throw Error("rle_decode: runs sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
  }
  BinaryMask out(record.width, record.height);
  std::uint64_t pos = 0;
  std::uint8_t value = 0;
  for (auto c : record.counts) {
    for (std::uint32_t k = 0; k < c; ++k, ++pos) {
      const int x = static_cast<int>(pos / static_cast<std::uint64_t>(record.height));
      const int y = static_cast<int>(pos % static_cast<std::uint64_t>(record.height));
      out(x, y) = value;
    }
    value ^= 1;
  }
  return out;
}

}  // namespace hgd
