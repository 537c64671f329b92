// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hgd/raster.hpp"
#include "json.hpp"

namespace hgd {

enum class ScoreMode { kAverage, kWeightedAverage };

struct FusionConfig {
  double iou_threshold = 0.55;
  double skip_box_threshold = 0.0;
  double mask_threshold = 0.5;
  ScoreMode score_mode = ScoreMode::kWeightedAverage;

  void validate() const;
};

std::string to_string(ScoreMode mode);
ScoreMode score_mode_from_string(const std::string& s);

struct MemberRef {
  std::string model_id;
  std::size_t index = 0;

  bool operator==(const MemberRef&) const = default;
};

struct ClusterMember {
  std::size_t set = 0;    // position in the input span
  std::size_t index = 0;  // position inside that set
  BBox box;
  double model_weight = 1.0;

  double weight() const { return box.score * model_weight; }
};

struct BoxCluster {
  BBox fused;
  std::vector<ClusterMember> members;
};

/// Greedy weighted box clustering.
///
/// Boxes from every set are visited in descending score (ties by model_id,
/// then index). A box joins the first cluster, in creation order, whose
/// running fused box overlaps it with IoU >= iou_threshold; otherwise it opens
/// a new cluster. Fused coordinates are the (score * model_weight)-weighted
/// mean of member coordinates. The fused score is the member-score mean
/// (model-weighted or plain, per score_mode) scaled by
/// min(1, members / contributing models).
///
/// Boxes below skip_box_threshold or with zero weight are ignored, and sets
/// with model_weight 0 do not count as contributing models. Sets must share
/// tile id and dimensions and carry distinct model ids.
std::vector<BoxCluster> wbf_boxes(std::span<const InstanceSet> sets, const FusionConfig& cfg);

/// Weighted per-pixel average of member masks, binarized at `> mask_threshold`.
BinaryMask fuse_masks(std::span<const InstanceMask* const> masks, std::span<const double> weights,
                      const FusionConfig& cfg);

struct FusedInstance {
  BBox box;
  BinaryMask mask;
  std::vector<MemberRef> members;
};

/// WBF boxes, fused member masks, masks cropped to the fused box, empty
/// results dropped; ordered by descending fused score.
std::vector<FusedInstance> wsf(std::span<const InstanceSet> sets, const FusionConfig& cfg);

/// Greedy NMS over the pooled boxes; a box is suppressed when its IoU with a
/// kept box exceeds iou_threshold. Probability masks are binarized at 0.5.
std::vector<FusedInstance> nms_baseline(std::span<const InstanceSet> sets, double iou_threshold);

nlohmann::json fused_to_json(const std::string& tile_id, const std::string& model_id, int width, int height,
                             std::span<const FusedInstance> instances);
std::vector<FusedInstance> fused_from_json(const nlohmann::json& j);

}  // namespace hgd
