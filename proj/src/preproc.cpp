// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/preproc.hpp"

#include <algorithm>
#include <cmath>

namespace hgd {

namespace {

constexpr double kGroundEdge = 1e-6;
constexpr int kLloydMaxIterations = 100;
constexpr double kLloydTolerance = 1e-6;

}  // namespace

HierarchySpec::HierarchySpec(std::vector<double> boundaries, std::vector<std::string> names)
    : boundaries_(std::move(boundaries)), names_(std::move(names)) {
  if (boundaries_.size() < 3) throw Error("hierarchy spec needs at least 2 bins");
  if (boundaries_.front() != 0.0) throw Error("hierarchy spec must start at 0");
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (!(boundaries_[i] > boundaries_[i - 1]) || !std::isfinite(boundaries_[i])) {
      throw Error("hierarchy boundaries must be strictly increasing and finite");
    }
  }
  if (boundaries_.size() - 1 > 256) throw Error("hierarchy spec supports at most 256 classes");
  if (!names_.empty() && names_.size() != boundaries_.size() - 1) {
    throw Error("hierarchy names must match the number of bins");
  }
}

HierarchySpec HierarchySpec::default_spec() {
  return HierarchySpec({0.0, kGroundEdge, 10.0, 36.0, 187.0}, {"ground", "low", "medium", "high"});
}

int HierarchySpec::classify(double meters) const {
  // upper_bound gives the first edge strictly above v, so v lands in [b_i, b_{i+1}).
  const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), meters);
  const int idx = static_cast<int>(it - boundaries_.begin()) - 1;
  return std::clamp(idx, 0, n_classes() - 1);
}

nlohmann::json HierarchySpec::to_json() const {
  return {{"boundaries", boundaries_}, {"names", names_}};
}

HierarchySpec HierarchySpec::from_json(const nlohmann::json& j) {
  try {
    return HierarchySpec(j.at("boundaries").get<std::vector<double>>(),
                         j.value("names", std::vector<std::string>{}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed hierarchy spec: ") + e.what());
  }
}

NormalizedHeightMap normalize_heights(const HeightMap& h, double norm_constant) {
  if (!(norm_constant > 0.0)) throw Error("norm_constant must be > 0");
  Grid<float> out(h.width(), h.height());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h.is_nodata(i)) {
      out[i] = h[i];
      continue;
    }
    const double v = std::log1p(static_cast<double>(h[i])) / norm_constant;
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return NormalizedHeightMap(std::move(out), norm_constant, h.nodata());
}

HeightMap denormalize_heights(const NormalizedHeightMap& nh) {
  Grid<float> out(nh.width(), nh.height());
  for (std::size_t i = 0; i < nh.size(); ++i) {
    if (nh.is_nodata(i)) {
      out[i] = nh[i];
      continue;
    }
    out[i] = static_cast<float>(std::max(0.0, std::expm1(static_cast<double>(nh[i]) * nh.norm_constant())));
  }
  return HeightMap(std::move(out), nh.nodata());
}

double compute_norm_constant(std::span<const HeightMap> train_tiles) {
  double best = 0.0;
  bool any_valid = false;
  for (const auto& tile : train_tiles) {
    for (std::size_t i = 0; i < tile.size(); ++i) {
      if (tile.is_nodata(i)) continue;
      any_valid = true;
      best = std::max(best, std::log1p(static_cast<double>(tile[i])));
    }
  }
  if (!any_valid) throw Error("compute_norm_constant: no valid pixels");
  if (!(best > 0.0)) throw Error("compute_norm_constant: all heights are zero");
  return best;
}

HierarchyMap synthesize_hierarchy_labels(const HeightMap& h, const HierarchySpec& spec) {
  Grid<std::uint8_t> out(h.width(), h.height());
  for (std::size_t i = 0; i < h.size(); ++i) {
    out[i] = h.is_nodata(i) ? 0 : static_cast<std::uint8_t>(spec.classify(h[i]));
  }
  return HierarchyMap(std::move(out), spec.n_classes());
}

HierarchySpec cluster_hierarchy_spec(std::span<const HeightMap> train_tiles, int n) {
  if (n < 2) throw Error("cluster_hierarchy_spec: n must be >= 2");
  const int k = n - 1;
  std::vector<double> values;
  for (const auto& tile : train_tiles) {
    for (std::size_t i = 0; i < tile.size(); ++i) {
      if (!tile.is_nodata(i) && tile[i] > 0.0f) values.push_back(tile[i]);
    }
  }
  if (values.empty()) throw Error("cluster_hierarchy_spec: no nonzero heights");
  std::sort(values.begin(), values.end());
  const double max_v = values.back();
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < values.size(); ++i) distinct += values[i] != values[i - 1];
  if (distinct < static_cast<std::size_t>(k)) {
    throw Error("cluster_hierarchy_spec: fewer distinct nonzero heights than clusters");
  }

  std::vector<double> centers(k);
  for (int j = 0; j < k; ++j) {
    const double q = (j + 0.5) / k;
    const auto idx = std::min(values.size() - 1, static_cast<std::size_t>(q * static_cast<double>(values.size())));
    centers[j] = values[idx];
  }

  for (int iter = 0; iter < kLloydMaxIterations; ++iter) {
    std::sort(centers.begin(), centers.end());
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    // Values are sorted, so assignment is a sweep over midpoints.
    int c = 0;
    for (double v : values) {
      while (c + 1 < k && v >= 0.5 * (centers[c] + centers[c + 1])) ++c;
      sum[c] += v;
      ++count[c];
    }
    double shift = 0.0;
    for (int j = 0; j < k; ++j) {
      if (count[j] == 0) continue;  // empty cluster keeps its center
      const double next = sum[j] / static_cast<double>(count[j]);
      shift = std::max(shift, std::abs(next - centers[j]));
      centers[j] = next;
    }
    if (shift < kLloydTolerance) break;
  }
  std::sort(centers.begin(), centers.end());

  std::vector<double> bounds{0.0, kGroundEdge};
  for (int j = 0; j + 1 < k; ++j) {
    const double mid = 0.5 * (centers[j] + centers[j + 1]);
    if (!(mid > bounds.back())) throw Error("cluster_hierarchy_spec: clusters collapsed");
    bounds.push_back(mid);
  }
  bounds.push_back(std::max(max_v + 1.0, std::nextafter(bounds.back(), INFINITY)));
  return HierarchySpec(std::move(bounds));
}

}  // namespace hgd
