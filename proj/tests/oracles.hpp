// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations used only by the tests. They are written
// from the definitions and share no code with the library beyond data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hgd/raster.hpp"
#include "hgd/rng.hpp"

namespace oracle {

inline double box_iou(const hgd::BBox& a, const hgd::BBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline double pixel_value(const hgd::InstanceMask& m, int x, int y) {
  if (const auto* b = std::get_if<hgd::BinaryMask>(&m)) return (*b)(x, y) ? 1.0 : 0.0;
  return std::get<hgd::ProbabilityMask>(m)(x, y);
}

struct RefInstance {
  double x0, y0, x1, y1, score;
  std::vector<std::vector<int>> mask;  // [y][x]
  std::vector<std::pair<std::string, std::size_t>> members;
};

struct RefBox {
  std::size_t set, index;
  hgd::BBox box;
  double model_weight;
};

// True when a should be processed before b.
inline bool ref_before(const RefBox& a, const RefBox& b, const std::vector<hgd::InstanceSet>& sets) {
  if (a.box.score != b.box.score) return a.box.score > b.box.score;
  const auto& ma = sets[a.set].model_id;
  const auto& mb = sets[b.set].model_id;
  if (ma != mb) return ma < mb;
  return a.index < b.index;
}

// Repeated selection of the first remaining box; no library sort involved.
inline std::vector<RefBox> ref_order(const std::vector<hgd::InstanceSet>& sets, double skip, bool drop_zero_weight) {
  std::vector<RefBox> pool;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (std::size_t i = 0; i < sets[s].instances.size(); ++i) {
      const auto& b = sets[s].instances[i].box;
      if (b.score < skip) continue;
      if (drop_zero_weight && !(b.score * sets[s].model_weight > 0.0)) continue;
      pool.push_back({s, i, b, sets[s].model_weight});
    }
  }
  std::vector<RefBox> out;
  while (!pool.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < pool.size(); ++k) {
      if (ref_before(pool[k], pool[best], sets)) best = k;
    }
    out.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

/// Weighted segmentation fusion from its definition.
inline std::vector<RefInstance> wsf(const std::vector<hgd::InstanceSet>& sets, double iou_thr, double skip,
                                    double mask_thr, bool weighted_score) {
  const int W = sets.front().width, H = sets.front().height;
  double models = 0;
  for (const auto& s : sets) models += s.model_weight > 0.0 ? 1 : 0;

  struct Cluster {
    std::vector<RefBox> m;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  };
  auto refit = [](Cluster& c) {
    double ws = 0, a = 0, b = 0, cc = 0, d = 0;
    for (const auto& r : c.m) {
      const double w = r.box.score * r.model_weight;
      ws += w;
      a += w * r.box.x_min;
      b += w * r.box.y_min;
      cc += w * r.box.x_max;
      d += w * r.box.y_max;
    }
    c.x0 = a / ws;
    c.y0 = b / ws;
    c.x1 = cc / ws;
    c.y1 = d / ws;
  };

  std::vector<Cluster> clusters;
  for (const auto& r : ref_order(sets, skip, true)) {
    bool placed = false;
    for (auto& c : clusters) {
      if (box_iou(hgd::BBox{c.x0, c.y0, c.x1, c.y1, 0}, r.box) >= iou_thr) {
        c.m.push_back(r);
        refit(c);
        placed = true;
        break;
      }
    }
    if (!placed) {
      clusters.push_back({{r}});
      refit(clusters.back());
    }
  }

  std::vector<RefInstance> out;
  for (const auto& c : clusters) {
    double num = 0, den = 0;
    for (const auto& r : c.m) {
      const double w = weighted_score ? r.model_weight : 1.0;
      num += w * r.box.score;
      den += w;
    }
    const double score = num / den * std::min(1.0, static_cast<double>(c.m.size()) / models);
    RefInstance ri{c.x0, c.y0, c.x1, c.y1, score, std::vector<std::vector<int>>(H, std::vector<int>(W, 0)), {}};
    double wsum = 0;
    for (const auto& r : c.m) wsum += r.box.score * r.model_weight;
    bool any = false;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0;
        for (const auto& r : c.m) acc += r.box.score * r.model_weight * pixel_value(sets[r.set].instances[r.index].mask, x, y);
        const double cx = x + 0.5, cy = y + 0.5;
        const bool inside = cx >= ri.x0 && cx <= ri.x1 && cy >= ri.y0 && cy <= ri.y1;
        ri.mask[y][x] = (inside && acc / wsum > mask_thr) ? 1 : 0;
        any = any || ri.mask[y][x];
      }
    }
    for (const auto& r : c.m) ri.members.emplace_back(sets[r.set].model_id, r.index);
    if (any) out.push_back(std::move(ri));
  }
  // Stable insertion sort by descending score.
  for (std::size_t i = 1; i < out.size(); ++i) {
    for (std::size_t j = i; j > 0 && out[j].score > out[j - 1].score; --j) std::swap(out[j], out[j - 1]);
  }
  return out;
}

/// Greedy NMS from its definition: keep a box unless it overlaps a kept one by more than the threshold.
inline std::vector<std::pair<std::string, std::size_t>> nms(const std::vector<hgd::InstanceSet>& sets, double iou_thr) {
  std::vector<RefBox> kept;
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& r : ref_order(sets, 0.0, false)) {
    bool suppressed = false;
    for (const auto& k : kept) suppressed = suppressed || box_iou(k.box, r.box) > iou_thr;
    if (suppressed) continue;
    kept.push_back(r);
    out.emplace_back(sets[r.set].model_id, r.index);
  }
  return out;
}

/// Random ensemble fixture: up to `max_boxes` boxes spread over up to `max_models` models,
/// clustered around a few anchors so that fusion actually merges.
inline std::vector<hgd::InstanceSet> random_fixture(hgd::Rng& rng, int max_boxes = 6, int max_models = 3, int size = 16) {
  const int n_models = static_cast<int>(rng.uniform_int(1, max_models));
  const int n_boxes = static_cast<int>(rng.uniform_int(1, max_boxes));
  std::vector<hgd::InstanceSet> sets(n_models);
  const double weights[] = {0.5, 1.0, 2.0};
  for (int m = 0; m < n_models; ++m) {
    sets[m].tile_id = "tile_0000";
    sets[m].model_id = "model_" + std::to_string(m);
    sets[m].model_weight = weights[rng.uniform_int(0, 2)];
    sets[m].width = size;
    sets[m].height = size;
  }
  std::vector<hgd::BBox> anchors;
  for (int a = 0; a < 2; ++a) {
    const double x0 = rng.uniform(0, size / 2.0), y0 = rng.uniform(0, size / 2.0);
    anchors.push_back({x0, y0, x0 + rng.uniform(3, size / 2.0), y0 + rng.uniform(3, size / 2.0), 0});
  }
  for (int b = 0; b < n_boxes; ++b) {
    const auto& a = anchors[rng.uniform_int(0, 1)];
    auto j = [&](double v) { return std::clamp(v + rng.uniform(-1.5, 1.5), 0.0, static_cast<double>(size)); };
    hgd::BBox box{j(a.x_min), j(a.y_min), j(a.x_max), j(a.y_max), 0};
    if (box.x_max < box.x_min) std::swap(box.x_min, box.x_max);
    if (box.y_max < box.y_min) std::swap(box.y_min, box.y_max);
    // Coarse scores make exact ties common.
    box.score = rng.uniform() < 0.3 ? std::round(rng.uniform(0.1, 1.0) * 4) / 4 : rng.uniform(0.05, 1.0);
    hgd::Instance inst;
    inst.box = box;
    if (rng.uniform() < 0.5) {
      hgd::BinaryMask m(size, size);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const bool in = box.contains_pixel_center(x, y);
          m(x, y) = (in ? rng.uniform() < 0.85 : rng.uniform() < 0.05) ? 1 : 0;
        }
      }
      inst.mask = std::move(m);
    } else {
      hgd::ProbabilityMask m(size, size);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const bool in = box.contains_pixel_center(x, y);
          // Quarter steps hit the binarization threshold exactly now and then.
          m(x, y) = static_cast<float>(std::round((in ? rng.uniform(0.3, 1.0) : rng.uniform(0.0, 0.4)) * 4) / 4);
        }
      }
      inst.mask = std::move(m);
    }
    sets[rng.uniform_int(0, n_models - 1)].instances.push_back(std::move(inst));
  }
  return sets;
}

}  // namespace oracle
