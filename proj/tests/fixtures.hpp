// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-evaluated evaluation fixture.
//
// Heights (eps = 1, ratio = max((p+1)/(g+1), (g+1)/(p+1))):
//   tile_a gt [0 10; 10 20]  pred [0 13; 10 30]
//     ratios 1, 14/11 = 1.273, 1, 31/21 = 1.476
//   tile_b gt [5 nodata 100 10]  pred [5 99 50 18]
//     ratios 1, skipped, 101/51 = 1.980, 19/11 = 1.727
//   7 pixels: delta1 3/7 (< 1.25), delta2 5/7 (< 1.5625), delta3 6/7 (< 1.953125).
//
// Instances (tile_a only, 8x8):
//   gt0 = rows 0-3 x cols 0-3 (16 px), gt1 = rows 4-7 x cols 4-7 (16 px)
//   p0 score .9 == gt0                 TP at every threshold
//   p1 score .8 at rows 0-1 x cols 6-7 FP
//   p2 score .7 = rows 4-6 x cols 4-7  IoU 12/16 = 0.75 with gt1
//   At IoU <= 0.75: TP FP TP. Precision at recall 0.5 is 1, at recall 1 it is 2/3.
//     101-point AP = (51 * 1 + 50 * 2/3) / 101
//   At IoU 0.80 .. 0.95: TP FP FP, AP = 51 / 101.
//   mAP = (6 * AP50 + 4 * 51/101) / 10.

#pragma once

#include <filesystem>

#include "hgd/raster_io.hpp"

namespace fixture {

struct Expected {
  double delta1 = 3.0 / 7.0;
  double delta2 = 5.0 / 7.0;
  double delta3 = 6.0 / 7.0;
  std::size_t pixels = 7;
  double ap50 = (51.0 + 50.0 * 2.0 / 3.0) / 101.0;
  double map = (6.0 * ((51.0 + 50.0 * 2.0 / 3.0) / 101.0) + 4.0 * (51.0 / 101.0)) / 10.0;
  double combined() const { return (ap50 + delta1) / 2.0; }
};

inline hgd::BinaryMask rect(int x0, int y0, int x1, int y1) {
  hgd::BinaryMask m(8, 8);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m(x, y) = 1;
  return m;
}

inline hgd::InstanceSet set_of(const std::string& model, std::vector<std::pair<double, hgd::BinaryMask>> items) {
  hgd::InstanceSet s;
  s.tile_id = "tile_a";
  s.model_id = model;
  s.width = 8;
  s.height = 8;
  for (auto& [score, m] : items) {
    auto b = *hgd::mask_bounds(m);
    b.score = score;
    s.instances.push_back({b, m});
  }
  return s;
}

/// Writes `<root>/{pred,gt}/{heights,instances}` and returns the hand-computed values.
inline Expected write(const std::filesystem::path& root) {
  using hgd::HeightMap;
  hgd::write_height_map(root / "gt/heights/tile_a.f32", HeightMap(2, 2, {0, 10, 10, 20}));
  hgd::write_height_map(root / "pred/heights/tile_a.f32", HeightMap(2, 2, {0, 13, 10, 30}));
  hgd::write_height_map(root / "gt/heights/tile_b.f32", HeightMap(4, 1, {5, -1, 100, 10}, -1.0f));
  hgd::write_height_map(root / "pred/heights/tile_b.f32", HeightMap(4, 1, {5, 99, 50, 18}));

  hgd::write_instance_set(root / "gt/instances/tile_a.json",
                          set_of("ground_truth", {{1.0, rect(0, 0, 4, 4)}, {1.0, rect(4, 4, 8, 8)}}));
  hgd::write_instance_set(root / "pred/instances/tile_a.json",
                          set_of("model", {{0.9, rect(0, 0, 4, 4)}, {0.8, rect(6, 0, 8, 2)}, {0.7, rect(4, 4, 8, 7)}}));
  return {};
}

}  // namespace fixture
