// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "hgd/raster_io.hpp"

namespace hgd {

namespace {

struct Hit {
  double score;
  bool tp;
};

// Greedy matching of one tile at one threshold, appending one Hit per prediction.
void match_tile(const TileDetections& tile, const std::vector<std::vector<double>>& iou, double thr,
                std::vector<Hit>& hits, std::size_t* matched) {
  std::vector<std::size_t> order(tile.predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tile.predictions[a].score > tile.predictions[b].score;
  });
  std::vector<bool> taken(tile.ground_truth.size(), false);
  for (std::size_t p : order) {
    int best = -1;
    double best_iou = thr;
    for (std::size_t g = 0; g < tile.ground_truth.size(); ++g) {
      if (taken[g]) continue;
      if (iou[p][g] >= best_iou && (best < 0 || iou[p][g] > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou[p][g];
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      if (matched) ++*matched;
    }
    hits.push_back({tile.predictions[p].score, best >= 0});
  }
}

std::vector<std::vector<double>> iou_matrix(const TileDetections& tile) {
  std::vector<std::vector<double>> m(tile.predictions.size(), std::vector<double>(tile.ground_truth.size()));
  for (std::size_t p = 0; p < tile.predictions.size(); ++p) {
    for (std::size_t g = 0; g < tile.ground_truth.size(); ++g) {
      m[p][g] = iou_mask(tile.predictions[p].mask, tile.ground_truth[g]);
    }
  }
  return m;
}

double interpolated_ap(std::vector<Hit> hits, std::size_t n_gt) {
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.score > b.score; });
  std::vector<double> recall(hits.size()), precision(hits.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    tp += hits[k].tp;
    recall[k] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  for (std::size_t k = hits.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

std::vector<std::string> list_tiles(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.size() <= ext.size() || name.compare(name.size() - ext.size(), ext.size(), ext) != 0) continue;
    const auto stem = name.substr(0, name.size() - ext.size());
    if (stem.find('.') != std::string::npos) continue;  // sidecars such as x.f32.json
    out.push_back(stem);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void report_missing(const std::vector<std::string>& missing, const EvalOptions& opts, const std::string& what,
                    std::vector<std::string>* sink) {
  if (sink) sink->insert(sink->end(), missing.begin(), missing.end());
  if (missing.empty() || opts.allow_partial) return;
  std::string msg = "missing " + what + " predictions for tiles:";
  for (const auto& t : missing) msg += " " + t;
  throw Error(msg);
}

std::string threshold_key(double t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", t);
  return buf;
}

}  // namespace

DeltaCounts& DeltaCounts::operator+=(const DeltaCounts& o) {
  for (int k = 0; k < 3; ++k) within[k] += o.within[k];
  evaluated += o.evaluated;
  return *this;
}

double DeltaCounts::fraction(int level) const {
  if (level < 1 || level > 3) throw Error("delta level must be 1, 2 or 3");
  if (evaluated == 0) throw Error("delta accuracy: no evaluated pixels");
  return static_cast<double>(within[level - 1]) / static_cast<double>(evaluated);
}

DeltaCounts delta_counts(const HeightMap& pred, const HeightMap& gt, double eps) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) throw Error("delta accuracy: shape mismatch");
  if (!(eps >= 0.0)) throw Error("delta accuracy: eps must be >= 0");
  const double t1 = kDeltaBase, t2 = t1 * kDeltaBase, t3 = t2 * kDeltaBase;
  DeltaCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.is_nodata(i) || pred.is_nodata(i)) continue;
    const double a = static_cast<double>(gt[i]) + eps;
    const double b = static_cast<double>(pred[i]) + eps;
    const double ratio = a == b ? 1.0 : std::max(a / b, b / a);
    ++c.evaluated;
    c.within[0] += ratio < t1;
    c.within[1] += ratio < t2;
    c.within[2] += ratio < t3;
  }
  return c;
}

double delta_accuracy(const HeightMap& pred, const HeightMap& gt, int level, double eps) {
  return delta_counts(pred, gt, eps).fraction(level);
}

std::optional<double> average_precision(std::span<const TileDetections> tiles, double iou_threshold) {
  std::vector<Hit> hits;
  std::size_t n_gt = 0;
  for (const auto& t : tiles) {
    n_gt += t.ground_truth.size();
    match_tile(t, iou_matrix(t), iou_threshold, hits, nullptr);
  }
  if (n_gt == 0) return hits.empty() ? std::nullopt : std::optional<double>(0.0);
  return interpolated_ap(std::move(hits), n_gt);
}

std::optional<double> ap_masks(std::span<const ScoredMask> predictions, std::span<const BinaryMask> ground_truth,
                               double iou_threshold) {
  TileDetections t{"", {predictions.begin(), predictions.end()}, {ground_truth.begin(), ground_truth.end()}};
  return average_precision(std::span<const TileDetections>(&t, 1), iou_threshold);
}

APReport ap_report(std::span<const TileDetections> tiles) {
  APReport r;
  std::vector<std::vector<std::vector<double>>> ious;
  std::size_t n_gt = 0, n_pred = 0;
  for (const auto& t : tiles) {
    ious.push_back(iou_matrix(t));
    n_gt += t.ground_truth.size();
    n_pred += t.predictions.size();
  }
  for (std::size_t k = 0; k < kCocoIouThresholds.size(); ++k) {
    const double thr = kCocoIouThresholds[k];
    std::vector<Hit> hits;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      std::vector<Hit> tile_hits;
      match_tile(tiles[i], ious[i], thr, tile_hits, &matched);
      if (k == 0 && !tiles[i].tile_id.empty()) {
        if (!tiles[i].ground_truth.empty()) {
          r.per_tile_ap50[tiles[i].tile_id] = interpolated_ap(tile_hits, tiles[i].ground_truth.size());
        } else if (!tile_hits.empty()) {
          r.per_tile_ap50[tiles[i].tile_id] = 0.0;
        }
      }
      hits.insert(hits.end(), tile_hits.begin(), tile_hits.end());
    }
    r.per_threshold[k] = n_gt == 0 ? 0.0 : interpolated_ap(std::move(hits), n_gt);
    if (k == 0) {
      r.matched = matched;
      r.unmatched_predictions = n_pred - matched;
      r.unmatched_ground_truth = n_gt - matched;
    }
  }
  r.ap50 = r.per_threshold[0];
  r.map = std::accumulate(r.per_threshold.begin(), r.per_threshold.end(), 0.0) /
          static_cast<double>(r.per_threshold.size());
  return r;
}

double combined_score(double ap50, double delta1) { return (ap50 + delta1) / 2.0; }

nlohmann::json to_json(const DeltaReport& r) {
  json j{{"d1", r.delta1}, {"d2", r.delta2}, {"d3", r.delta3}, {"evaluated_pixels", r.evaluated_pixels}};
  return j;
}

nlohmann::json to_json(const APReport& r) {
  json per = json::object();
  for (std::size_t k = 0; k < kCocoIouThresholds.size(); ++k) per[threshold_key(kCocoIouThresholds[k])] = r.per_threshold[k];
  return {{"ap50", r.ap50},
          {"map", r.map},
          {"per_threshold", per},
          {"matched", r.matched},
          {"unmatched_predictions", r.unmatched_predictions},
          {"unmatched_ground_truth", r.unmatched_ground_truth}};
}

nlohmann::json EvalReport::to_json() const {
  json j = json::object();
  json per_tile = json::object();
  if (delta) {
    j["delta"] = hgd::to_json(*delta);
    for (const auto& [tile, c] : delta->per_tile) {
      if (c.evaluated == 0) continue;
      per_tile[tile]["d1"] = c.fraction(1);
      per_tile[tile]["d2"] = c.fraction(2);
      per_tile[tile]["d3"] = c.fraction(3);
    }
  }
  if (ap) {
    j["ap"] = hgd::to_json(*ap);
    for (const auto& [tile, v] : ap->per_tile_ap50) per_tile[tile]["ap50"] = v;
  }
  j["combined"] = combined ? json(*combined) : json(nullptr);
  j["per_tile"] = per_tile;
  j["missing_tiles"] = missing_tiles;
  return j;
}

DeltaReport evaluate_heights(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& opts,
                             std::vector<std::string>* missing) {
  DeltaReport r;
  DeltaCounts total;
  std::vector<std::string> absent;
  for (const auto& tile : list_tiles(gt_dir, ".f32")) {
    const auto pred_path = pred_dir / (tile + ".f32");
    if (!fs::exists(pred_path)) {
      absent.push_back(tile);
      continue;
    }
    const auto c = delta_counts(read_height_map(pred_path), read_height_map(gt_dir / (tile + ".f32")), opts.eps);
    r.per_tile[tile] = c;
    total += c;
  }
  report_missing(absent, opts, "height", missing);
  r.delta1 = total.fraction(1);
  r.delta2 = total.fraction(2);
  r.delta3 = total.fraction(3);
  r.evaluated_pixels = total.evaluated;
  return r;
}

APReport evaluate_instances(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& opts,
                            std::vector<std::string>* missing) {
  std::vector<TileDetections> tiles;
  std::vector<std::string> absent;
  for (const auto& tile : list_tiles(gt_dir, ".json")) {
    const auto pred_path = pred_dir / (tile + ".json");
    if (!fs::exists(pred_path)) {
      absent.push_back(tile);
      continue;
    }
    const InstanceSet gt = read_instance_set(gt_dir / (tile + ".json"));
    const InstanceSet pred = read_instance_set(pred_path);
    TileDetections td;
    td.tile_id = tile;
    for (const auto& inst : gt.instances) td.ground_truth.push_back(to_binary(inst.mask));
    for (const auto& inst : pred.instances) td.predictions.push_back({inst.box.score, to_binary(inst.mask)});
    tiles.push_back(std::move(td));
  }
  report_missing(absent, opts, "instance", missing);
  return ap_report(tiles);
}

EvalReport evaluate_run(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& opts) {
  EvalReport r;
  if (fs::is_directory(gt_dir / "heights")) {
    r.delta = evaluate_heights(pred_dir / "heights", gt_dir / "heights", opts, &r.missing_tiles);
  }
  if (fs::is_directory(gt_dir / "instances")) {
    r.ap = evaluate_instances(pred_dir / "instances", gt_dir / "instances", opts, &r.missing_tiles);
  }
  if (!r.delta && !r.ap) throw Error("evaluate_run: " + gt_dir.string() + " holds neither heights/ nor instances/");
  if (r.delta && r.ap) r.combined = combined_score(r.ap->ap50, r.delta->delta1);
  std::sort(r.missing_tiles.begin(), r.missing_tiles.end());
  r.missing_tiles.erase(std::unique(r.missing_tiles.begin(), r.missing_tiles.end()), r.missing_tiles.end());
  return r;
}

}  // namespace hgd
