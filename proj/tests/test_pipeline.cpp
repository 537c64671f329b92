// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>

#include "doctest.h"
#include "hgd/config.hpp"
#include "hgd/pipeline.hpp"
#include "hgd/raster_io.hpp"
#include "test_util.hpp"

using namespace hgd;

namespace {

bool has_error_at(const ConfigValidation& v, const std::string& ptr) {
  for (const auto& e : v.errors)
    if (e.pointer == ptr) return true;
  return false;
}

PipelineConfig small_config(const std::string& pipeline) {
  auto v = validate_config({{"pipeline", pipeline},
                            {"data", {{"train", 6}, {"val", 2}}},
                            {"train", {{"iterations", 20}}}});
  REQUIRE(v.ok());
  return *v.config;
}

}  // namespace

TEST_CASE("empty config yields defaults") {
  const auto v = validate_config(json::object());
  REQUIRE(v.ok());
  const auto& c = *v.config;
  CHECK(c.train.loss.alpha == 5.0);
  CHECK(c.train.loss.beta == 30.0);
  CHECK(c.min_height == 3.0);
  CHECK(c.fusion.iou_threshold == 0.55);
  CHECK(c.hierarchy.boundaries() == HierarchySpec::default_spec().boundaries());
  CHECK(c.detectors.size() == 3);
}

TEST_CASE("config errors carry JSON pointers") {
  CHECK(has_error_at(validate_config({{"loss", {{"alpha", -1}}}}), "/loss/alpha"));
  CHECK(has_error_at(validate_config({{"hierarchy", {{"boundaries", {0, 10, 5}}}}}), "/hierarchy/boundaries"));
  CHECK(has_error_at(validate_config({{"bogus", 1}}), "/bogus"));
  CHECK(has_error_at(validate_config({{"fusion", {{"iou", 0.5}}}}), "/fusion/iou"));
  const auto many = validate_config({{"loss", {{"alpha", -1}, {"beta", "x"}}}, {"seed", -4}});
  CHECK(many.errors.size() >= 3);
  CHECK_FALSE(many.config.has_value());
}

TEST_CASE("config survives its own serialization") {
  auto c = small_config("extraction");
  c.fusion.score_mode = ScoreMode::kAverage;
  const auto v = validate_config(c.to_json());
  REQUIRE(v.ok());
  CHECK(v.config->to_json() == c.to_json());
}

TEST_CASE("config file") {
  TempDir dir;
  write_bytes(dir / "empty.json", {});
  CHECK(validate_config_file(dir / "empty.json").ok());
  write_bytes(dir / "broken.json", {'{'});
  CHECK_FALSE(validate_config_file(dir / "broken.json").ok());
  CHECK_FALSE(validate_config_file(dir / "absent.json").ok());
}

TEST_CASE("parallel_for visits every index and propagates errors") {
  std::vector<std::atomic<int>> seen(97);
  parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i]++; });
  for (auto& s : seen) CHECK(s == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error("boom");
                  }),
                  Error);
}

TEST_CASE("environment overrides") {
  ::setenv("HGD_SEED", "41", 1);
  ::setenv("HGD_WORKERS", "2", 1);
  PipelineConfig c;
  c.workers = 8;
  apply_environment(c);
  CHECK(c.seed == 41);
  CHECK(c.train.seed == 41);
  CHECK(c.workers == 2);
  ::setenv("HGD_SEED", "x", 1);
  CHECK_THROWS_AS(apply_environment(c), Error);
  ::unsetenv("HGD_SEED");
  ::unsetenv("HGD_WORKERS");
}

TEST_CASE("height pipeline manifest") {
  TempDir dir;
  const auto m = run_pipeline(small_config("height"), dir / "run");
  const auto& metrics = m.at("metrics");
  CHECK(metrics.contains("delta1"));
  CHECK(metrics.at("delta1").get<double>() >= 0.0);
  std::vector<std::string> names;
  for (const auto& s : m.at("stages")) {
    names.push_back(s.at("name"));
    CHECK(s.at("hash").get<std::string>().size() == 16);
  }
  CHECK(names == std::vector<std::string>{"gen-synthetic", "synth-labels", "train-toy", "infer", "aggregate",
                                          "correct", "eval-height"});
  CHECK(read_json_file(dir / "run/manifest.json") == m);
  CHECK(std::filesystem::exists(dir / "run/eval/height.json"));

  const auto again = run_pipeline(small_config("height"), dir / "again");
  CHECK(again.at("manifest_hash") == m.at("manifest_hash"));
}

TEST_CASE("extraction pipeline manifest") {
  TempDir dir;
  const auto m = run_pipeline(small_config("extraction"), dir / "run");
  CHECK(m.at("metrics").contains("ap50"));
  CHECK(m.at("metrics").contains("nms_ap50"));
  CHECK(m.at("metrics").at("single_ap50").size() == 3);
  CHECK(std::filesystem::exists(dir / "run/fused/tile_0006.json"));
}

TEST_CASE("a failing stage is named and its output quarantined") {
  TempDir dir;
  auto c = small_config("height");
  // Every pixel is ground, so the normalization constant is undefined.
  c.scene.min_buildings = c.scene.max_buildings = 0;
  try {
    run_pipeline(c, dir / "run");
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "train-toy");
  }
  CHECK(std::filesystem::exists(dir / "run/quarantine/train-toy/error.txt"));
  CHECK_FALSE(std::filesystem::exists(dir / "run/manifest.json"));
}
