// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "hgd/raster.hpp"
#include "json.hpp"

namespace hgd {

/// Half-open height bins [b_i, b_{i+1}) in meters, b_0 == 0.
class HierarchySpec {
 public:
  HierarchySpec(std::vector<double> boundaries, std::vector<std::string> names = {});

  /// ground [0, 1e-6), low [1e-6, 10), medium [10, 36), high [36, 187).
  static HierarchySpec default_spec();

  const std::vector<double>& boundaries() const { return boundaries_; }
  const std::vector<std::string>& names() const { return names_; }
  int n_classes() const { return static_cast<int>(boundaries_.size()) - 1; }
  /// Class of a single height; values at or above the top edge clamp to the top class.
  int classify(double meters) const;

  nlohmann::json to_json() const;
  static HierarchySpec from_json(const nlohmann::json& j);

 private:
  std::vector<double> boundaries_;
  std::vector<std::string> names_;
};

/// v -> ln(1 + v) / norm_constant, clamped to [0, 1]. Nodata pixels pass through.
NormalizedHeightMap normalize_heights(const HeightMap& h, double norm_constant);
/// v -> exp(v * norm_constant) - 1.
HeightMap denormalize_heights(const NormalizedHeightMap& nh);

/// Dataset-wide max of ln(1 + v) over all valid pixels.
double compute_norm_constant(std::span<const HeightMap> train_tiles);

HierarchyMap synthesize_hierarchy_labels(const HeightMap& h, const HierarchySpec& spec);

/// Quantile-initialized 1-D Lloyd's k-means over nonzero heights with k = n - 1.
HierarchySpec cluster_hierarchy_spec(std::span<const HeightMap> train_tiles, int n);

}  // namespace hgd
