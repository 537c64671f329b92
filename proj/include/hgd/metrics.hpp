// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgd/raster.hpp"
#include "json.hpp"

namespace hgd {

inline constexpr double kDeltaBase = 1.25;
inline constexpr double kDefaultDeltaEps = 1.0;

/// Fraction of valid pixels with max((y+eps)/(p+eps), (p+eps)/(y+eps)) < 1.25^level.
double delta_accuracy(const HeightMap& pred, const HeightMap& gt, int level, double eps = kDefaultDeltaEps);

struct DeltaCounts {
  std::size_t within[3] = {0, 0, 0};
  std::size_t evaluated = 0;

  DeltaCounts& operator+=(const DeltaCounts& o);
  double fraction(int level) const;
};

/// Counts for all three levels in one pass; pixels that are nodata in either map are skipped.
DeltaCounts delta_counts(const HeightMap& pred, const HeightMap& gt, double eps = kDefaultDeltaEps);

struct DeltaReport {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t evaluated_pixels = 0;
  std::map<std::string, DeltaCounts> per_tile;
};

struct ScoredMask {
  double score = 0.0;
  BinaryMask mask;
};

/// Predictions and ground truth of one tile.
struct TileDetections {
  std::string tile_id;
  std::vector<ScoredMask> predictions;
  std::vector<BinaryMask> ground_truth;
};

inline constexpr std::array<double, 10> kCocoIouThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                              0.75, 0.80, 0.85, 0.90, 0.95};

/// Mask AP at one IoU threshold, pooled over tiles with 101-point interpolation.
/// nullopt when there is neither ground truth nor a prediction; 0 when only predictions exist.
std::optional<double> average_precision(std::span<const TileDetections> tiles, double iou_threshold);

/// Single-tile convenience form.
std::optional<double> ap_masks(std::span<const ScoredMask> predictions, std::span<const BinaryMask> ground_truth,
                               double iou_threshold);

struct APReport {
  double ap50 = 0.0;
  double map = 0.0;
  std::array<double, 10> per_threshold{};
  std::size_t matched = 0;           // true positives at IoU 0.5
  std::size_t unmatched_predictions = 0;
  std::size_t unmatched_ground_truth = 0;
  std::map<std::string, double> per_tile_ap50;
};

APReport ap_report(std::span<const TileDetections> tiles);

double combined_score(double ap50, double delta1);

struct EvalOptions {
  double eps = kDefaultDeltaEps;
  bool allow_partial = false;
};

struct EvalReport {
  std::optional<DeltaReport> delta;
  std::optional<APReport> ap;
  std::optional<double> combined;
  std::vector<std::string> missing_tiles;

  nlohmann::json to_json() const;
};

/// `<dir>/<tile>.f32` height rasters, tiles taken from the ground-truth directory.
DeltaReport evaluate_heights(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                             const EvalOptions& opts, std::vector<std::string>* missing = nullptr);
/// `<dir>/<tile>.json` instance manifests.
APReport evaluate_instances(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                            const EvalOptions& opts, std::vector<std::string>* missing = nullptr);
/// Evaluates `heights/` and `instances/` subdirectories where the ground truth has them.
EvalReport evaluate_run(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                        const EvalOptions& opts = {});

nlohmann::json to_json(const DeltaReport& r);
nlohmann::json to_json(const APReport& r);

}  // namespace hgd
