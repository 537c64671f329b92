// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgd/fusion.hpp"
#include "hgd/preproc.hpp"
#include "hgd/synth.hpp"
#include "hgd/trainer.hpp"
#include "json.hpp"

namespace hgd {

struct DetectorSpec {
  std::string model_id;
  double weight = 1.0;
  DetectorNoise noise;
};

/// A fully-defaulted run configuration.
struct PipelineConfig {
  std::string pipeline = "height";  // "height" or "extraction"
  std::uint64_t seed = 3;
  int workers = 0;  // 0 selects the hardware concurrency

  SceneConfig scene;
  int n_train = 64;
  int n_val = 16;

  HierarchySpec hierarchy = HierarchySpec::default_spec();
  int cluster_classes = 0;  // > 0 derives the bins by clustering instead

  TrainConfig train;  // train.loss holds alpha/beta, train.seed mirrors `seed`
  std::vector<double> scales{1.0};
  bool correct = true;
  double min_height = 3.0;
  double eps = 1.0;
  bool allow_partial = false;

  FusionConfig fusion;
  std::vector<DetectorSpec> detectors;

  nlohmann::json to_json() const;
};

struct ConfigError {
  std::string pointer;  // JSON pointer to the offending value
  std::string message;
};

struct ConfigValidation {
  std::optional<PipelineConfig> config;
  std::vector<ConfigError> errors;

  bool ok() const { return errors.empty(); }
};

/// Schema check with defaults applied and unknown keys rejected. Every
/// violation is reported; `config` is set only when there are none.
ConfigValidation validate_config(const nlohmann::json& doc);
ConfigValidation validate_config_file(const std::filesystem::path& path);

/// Three simulated detectors with graded noise, used when a run configures none.
std::vector<DetectorSpec> default_detectors();

}  // namespace hgd
