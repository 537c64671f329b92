// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "hgd/raster_io.hpp"

namespace hgd {

namespace {

struct Candidate {
  std::size_t set;
  std::size_t index;
  const std::string* model_id;
  BBox box;
  double model_weight;
};

void check_sets(std::span<const InstanceSet> sets) {
  std::set<std::string> ids;
  for (const auto& s : sets) {
    s.validate();
    if (s.width != sets.front().width || s.height != sets.front().height) {
      throw Error("fusion inputs differ in tile dimensions (" + s.model_id + ")");
    }
    if (s.tile_id != sets.front().tile_id) throw Error("fusion inputs mix tiles " + s.tile_id + " and " + sets.front().tile_id);
    if (!ids.insert(s.model_id).second) throw Error("fusion inputs repeat model id " + s.model_id);
  }
}

// Descending score, then model id, then index.
std::vector<Candidate> ordered_candidates(std::span<const InstanceSet> sets, double skip_threshold) {
  std::vector<Candidate> out;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (std::size_t i = 0; i < sets[s].instances.size(); ++i) {
      const auto& box = sets[s].instances[i].box;
      if (box.score < skip_threshold) continue;
      out.push_back({s, i, &sets[s].model_id, box, sets[s].model_weight});
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.box.score != b.box.score) return a.box.score > b.box.score;
    return std::tie(*a.model_id, a.index) < std::tie(*b.model_id, b.index);
  });
  return out;
}

BBox weighted_box(const std::vector<ClusterMember>& members) {
  double wsum = 0.0, x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  for (const auto& m : members) {
    const double w = m.weight();
    wsum += w;
    x0 += w * m.box.x_min;
    y0 += w * m.box.y_min;
    x1 += w * m.box.x_max;
    y1 += w * m.box.y_max;
  }
  return BBox{x0 / wsum, y0 / wsum, x1 / wsum, y1 / wsum, 0.0};
}

}  // namespace

void FusionConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw Error("iou_threshold must lie in (0, 1]");
  if (!(skip_box_threshold >= 0.0 && skip_box_threshold <= 1.0)) throw Error("skip_box_threshold must lie in [0, 1]");
  if (!(mask_threshold > 0.0 && mask_threshold < 1.0)) throw Error("mask_binarize_threshold must lie in (0, 1)");
}

std::string to_string(ScoreMode mode) {
  return mode == ScoreMode::kAverage ? "average" : "weighted-average";
}

ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "average") return ScoreMode::kAverage;
  if (s == "weighted-average") return ScoreMode::kWeightedAverage;
  throw Error("unknown score mode '" + s + "'");
}

std::vector<BoxCluster> wbf_boxes(std::span<const InstanceSet> sets, const FusionConfig& cfg) {
  cfg.validate();
  if (sets.empty()) return {};
  check_sets(sets);
  std::size_t n_models = 0;
  for (const auto& s : sets) n_models += s.model_weight > 0.0;
  if (n_models == 0) throw Error("wbf_boxes: every model weight is 0");

  std::vector<BoxCluster> clusters;
  for (const auto& c : ordered_candidates(sets, cfg.skip_box_threshold)) {
    ClusterMember member{c.set, c.index, c.box, c.model_weight};
    if (!(member.weight() > 0.0)) continue;
    BoxCluster* target = nullptr;
    for (auto& cl : clusters) {
      if (iou_box(cl.fused, c.box) >= cfg.iou_threshold) {
        target = &cl;
        break;
      }
    }
    if (!target) {
      clusters.push_back({});
      target = &clusters.back();
    }
    target->members.push_back(member);
    target->fused = weighted_box(target->members);
  }

  for (auto& cl : clusters) {
    double num = 0.0, den = 0.0;
    for (const auto& m : cl.members) {
      const double w = cfg.score_mode == ScoreMode::kWeightedAverage ? m.model_weight : 1.0;
      num += w * m.box.score;
      den += w;
    }
    const double agreement =
        std::min(1.0, static_cast<double>(cl.members.size()) / static_cast<double>(n_models));
    cl.fused.score = num / den * agreement;
  }
  return clusters;
}

BinaryMask fuse_masks(std::span<const InstanceMask* const> masks, std::span<const double> weights,
                      const FusionConfig& cfg) {
  if (masks.empty()) throw Error("fuse_masks: no members");
  if (masks.size() != weights.size()) throw Error("fuse_masks: one weight per mask required");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("fuse_masks: weights must be >= 0");
    wsum += w;
  }
  if (!(wsum > 0.0)) throw Error("fuse_masks: weight sum is 0");
  const int w = mask_width(*masks.front());
  const int h = mask_height(*masks.front());
  for (const auto* m : masks) {
    if (mask_width(*m) != w || mask_height(*m) != h) throw Error("fuse_masks: member masks differ in size");
  }
  BinaryMask out(w, h);
  for (std::size_t p = 0; p < out.size(); ++p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < masks.size(); ++k) acc += weights[k] * mask_value(*masks[k], p);
    out[p] = (acc / wsum) > cfg.mask_threshold ? 1 : 0;
  }
  return out;
}

std::vector<FusedInstance> wsf(std::span<const InstanceSet> sets, const FusionConfig& cfg) {
  const auto clusters = wbf_boxes(sets, cfg);
  std::vector<FusedInstance> out;
  for (const auto& cl : clusters) {
    std::vector<const InstanceMask*> masks;
    std::vector<double> weights;
    FusedInstance fi;
    fi.box = cl.fused;
    for (const auto& m : cl.members) {
      masks.push_back(&sets[m.set].instances[m.index].mask);
      weights.push_back(m.weight());
      fi.members.push_back({sets[m.set].model_id, m.index});
    }
    fi.mask = fuse_masks(masks, weights, cfg);
    bool any = false;
    for (int y = 0; y < fi.mask.height(); ++y) {
      for (int x = 0; x < fi.mask.width(); ++x) {
        if (!fi.box.contains_pixel_center(x, y)) fi.mask(x, y) = 0;
        any |= fi.mask(x, y) != 0;
      }
    }
    if (any) out.push_back(std::move(fi));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FusedInstance& a, const FusedInstance& b) { return a.box.score > b.box.score; });
  return out;
}

std::vector<FusedInstance> nms_baseline(std::span<const InstanceSet> sets, double iou_threshold) {
  if (sets.empty()) return {};
  check_sets(sets);
  std::vector<FusedInstance> kept;
  for (const auto& c : ordered_candidates(sets, 0.0)) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (iou_box(k.box, c.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    kept.push_back({c.box, to_binary(sets[c.set].instances[c.index].mask), {{*c.model_id, c.index}}});
  }
  return kept;
}

nlohmann::json fused_to_json(const std::string& tile_id, const std::string& model_id, int width, int height,
                             std::span<const FusedInstance> instances) {
  json j;
  j["tile_id"] = tile_id;
  j["model_id"] = model_id;
  j["model_weight"] = 1.0;
  j["size"] = {height, width};
  j["instances"] = json::array();
  for (const auto& fi : instances) {
    json ij = instance_to_json(Instance{fi.box, fi.mask});
    ij["members"] = json::array();
    for (const auto& m : fi.members) ij["members"].push_back({{"model_id", m.model_id}, {"index", m.index}});
    j["instances"].push_back(std::move(ij));
  }
  return j;
}

std::vector<FusedInstance> fused_from_json(const nlohmann::json& j) {
  const InstanceSet set = instance_set_from_json(j);
  std::vector<FusedInstance> out;
  for (std::size_t k = 0; k < set.instances.size(); ++k) {
    FusedInstance fi;
    fi.box = set.instances[k].box;
    fi.mask = to_binary(set.instances[k].mask);
    const auto& ij = j.at("instances")[k];
    if (ij.contains("members")) {
      for (const auto& m : ij.at("members")) {
        fi.members.push_back({m.at("model_id").get<std::string>(), m.at("index").get<std::size_t>()});
      }
    }
    out.push_back(std::move(fi));
  }
  return out;
}

}  // namespace hgd
