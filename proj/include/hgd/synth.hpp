// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hgd/raster.hpp"
#include "json.hpp"

namespace hgd {

/// Procedural city tile parameters. Heights are log-normal in meters,
/// resampled until they fall in [min_height, max_height).
struct SceneConfig {
  int tile_size = 32;
  int min_buildings = 2;
  int max_buildings = 6;
  int min_footprint = 4;
  int max_footprint = 10;
  double height_mu = 2.0;
  double height_sigma = 0.8;
  double min_height = 3.0;
  double max_height = 187.0;
  int offset_x = 0;  // instance footprints are shifted by this many pixels relative to the nDSM
  int offset_y = 0;
  double noise = 0.02;       // image Gaussian noise stddev
  double ndsm_noise = 0.0;   // Gaussian noise stddev added to building pixels of the nDSM
  std::uint64_t seed = 11;

  void validate() const;
  nlohmann::json to_json() const;
  static SceneConfig from_json(const nlohmann::json& j);
};

struct SyntheticTile {
  std::string tile_id;
  Image image;
  HeightMap ndsm;
  InstanceSet instances;
};

std::string tile_name(int index);

SyntheticTile generate_tile(const SceneConfig& cfg, int index);

/// Writes train tiles with indices [0, n_train) and val tiles [n_train, n_train + n_val)
/// under `<out>/{train,val}/{images,ndsm,instances}/` and returns the manifest,
/// also saved as `<out>/manifest.json`.
nlohmann::json generate_split(const SceneConfig& cfg, int n_train, int n_val, const std::filesystem::path& out);

/// Noise model of a simulated instance-segmentation detector.
struct DetectorNoise {
  double miss_rate = 0.15;
  double false_positives = 0.6;  // expected spurious detections per tile
  int max_shift = 1;             // mask translation in pixels, uniform in [-max_shift, max_shift]
  double boundary_flip = 0.3;    // probability of flipping each mask boundary pixel
  double box_jitter = 0.75;      // stddev in pixels on each box coordinate
  double score_noise = 0.1;

  nlohmann::json to_json() const;
  static DetectorNoise from_json(const nlohmann::json& j);
};

/// Degrades ground-truth instances into the output of an imperfect detector.
InstanceSet simulate_detector(const InstanceSet& ground_truth, const DetectorNoise& noise, std::uint64_t seed,
                              const std::string& model_id, double model_weight = 1.0);

}  // namespace hgd
