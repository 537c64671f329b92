// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hgd/config.hpp"
#include "hgd/fusion.hpp"
#include "hgd/metrics.hpp"
#include "hgd/preproc.hpp"
#include "hgd/trainer.hpp"
#include "json.hpp"

namespace hgd {

namespace fs = std::filesystem;

/// Raised when a pipeline stage fails; names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware concurrency).
/// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Worker count after applying HGD_WORKERS as an upper bound.
int effective_workers(int configured);
/// Applies HGD_SEED and HGD_WORKERS from the environment.
void apply_environment(PipelineConfig& cfg);

// Individual stages. Each reads and writes files only, so any of them can be rerun alone.

/// Tile ids (file stems) of `<dir>/*<ext>`, sorted, sidecars excluded.
std::vector<std::string> list_tile_ids(const fs::path& dir, const std::string& ext);

/// Writes `<out>/<tile>.u8` hierarchy maps and `<out>/hierarchy.json`.
HierarchySpec synth_labels_dir(const fs::path& ndsm_dir, const std::optional<HierarchySpec>& spec, int cluster_n,
                               const fs::path& out_dir);

/// Normalizes every `<ndsm_dir>/<tile>.f32`; the constant is computed over the
/// directory unless given. Returns the constant and writes `<out>/norm.json`.
double normalize_dir(const fs::path& ndsm_dir, const fs::path& out_dir, std::optional<double> norm_constant);

/// Trains on `<data>/train/{images,ndsm}` with labels from `labels_dir` and
/// saves the checkpoint plus `<model>.trace.json`.
TrainResult train_toy_dir(const fs::path& data_dir, const fs::path& labels_dir, const TrainConfig& cfg,
                          const fs::path& model_out, int workers = 1);

/// Multi-scale inference: `<out>/scale_<s>/<tile>.f32` (meters at that scale) and `<out>/seg/<tile>.u8`.
void infer_dir(const fs::path& model_path, const fs::path& images_dir, const std::vector<double>& scales,
               const fs::path& out_dir, int workers);

/// Max-aggregates every `<infer>/scale_*/<tile>.f32` onto the grid of `<infer>/seg/<tile>.u8`.
void aggregate_dir(const fs::path& infer_dir, const fs::path& out_dir, int workers);

void correct_dir(const fs::path& heights_dir, const fs::path& seg_dir, double min_height, const fs::path& out_dir,
                 int workers);

/// Reads every instance-set JSON below `inputs_dir`, groups them by tile and
/// writes one fused manifest per tile to `<out>/<tile>.json`.
void fuse_dir(const fs::path& inputs_dir, const FusionConfig& cfg, const fs::path& out_dir, int workers);

/// Groups instance sets found below `dir` by tile id.
std::map<std::string, std::vector<InstanceSet>> load_instance_sets(const fs::path& dir);

/// Executes the configured stage chain under `out_dir` and returns the run
/// manifest (also written to `<out_dir>/manifest.json`). On failure the
/// failing stage's partial output is moved to `<out_dir>/quarantine/`.
nlohmann::json run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir);

/// Hash over the manifest's stage hashes and metrics, excluding timings.
std::string manifest_hash(const nlohmann::json& manifest);

}  // namespace hgd
