// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "hgd/postproc.hpp"
#include "hgd/raster_io.hpp"
#include "hgd/synth.hpp"

namespace hgd {

namespace {

std::string scale_dir_name(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scale_%.3f", s);
  return buf;
}

std::vector<fs::path> scale_dirs(const fs::path& infer_dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(infer_dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("scale_", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no scale_* directories under " + infer_dir.string());
  return out;
}

struct StageRecord {
  std::string name;
  fs::path output;
  bool skipped = false;
  std::string hash;
  double seconds = 0.0;
};

class StageRunner {
 public:
  explicit StageRunner(fs::path root) : root_(std::move(root)) {}

  void run(const std::string& name, const fs::path& output, const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fs::remove_all(output);
    try {
      fn();
    } catch (const std::exception& e) {
      quarantine(name, output, e.what());
      throw StageError(name, e.what());
    }
    StageRecord rec{name, output, false, fs::exists(output) ? hash_tree(output) : std::string("absent"), 0.0};
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records_.push_back(std::move(rec));
  }

  void skip(const std::string& name) { records_.push_back({name, {}, true, "skipped", 0.0}); }

  json to_json() const {
    json stages = json::array();
    for (const auto& r : records_) {
      json s{{"name", r.name}, {"hash", r.hash}, {"seconds", r.seconds}};
      if (r.skipped) s["skipped"] = true;
      else s["output"] = fs::relative(r.output, root_).generic_string();
      stages.push_back(std::move(s));
    }
    return stages;
  }

 private:
  // Moves partial output to quarantine/<stage>/output and records the error next to it.
  void quarantine(const std::string& name, const fs::path& output, const std::string& what) {
    const fs::path dest = root_ / "quarantine" / name;
    std::error_code ec;
    fs::remove_all(dest, ec);
    fs::create_directories(dest, ec);
    if (fs::exists(output)) fs::rename(output, dest / "output", ec);
    const std::string text = what + "\n";
    write_bytes(dest / "error.txt", std::vector<std::uint8_t>(text.begin(), text.end()));
  }

  fs::path root_;
  std::vector<StageRecord> records_;
};

}  // namespace

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, effective_workers(workers))));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

int effective_workers(int configured) {
  int n = configured > 0 ? configured : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* cap = std::getenv("HGD_WORKERS")) {
    const int c = std::atoi(cap);
    if (c > 0) n = std::min(n, c);
  }
  return n;
}

void apply_environment(PipelineConfig& cfg) {
  if (const char* seed = std::getenv("HGD_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(seed, &end, 10);
    if (end == seed || *end != '\0') throw Error(std::string("HGD_SEED is not an integer: ") + seed);
    cfg.seed = v;
    cfg.train.seed = v;
  }
  cfg.workers = effective_workers(cfg.workers);
}

std::vector<std::string> list_tile_ids(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.size() <= ext.size() || name.compare(name.size() - ext.size(), ext.size(), ext) != 0) continue;
    const auto stem = name.substr(0, name.size() - ext.size());
    if (stem.find('.') != std::string::npos) continue;
    out.push_back(stem);
  }
  std::sort(out.begin(), out.end());
  return out;
}

HierarchySpec synth_labels_dir(const fs::path& ndsm_dir, const std::optional<HierarchySpec>& spec, int cluster_n,
                               const fs::path& out_dir) {
  const auto tiles = list_tile_ids(ndsm_dir, ".f32");
  if (tiles.empty()) throw Error("no nDSM rasters in " + ndsm_dir.string());
  std::vector<HeightMap> maps;
  for (const auto& t : tiles) maps.push_back(read_height_map(ndsm_dir / (t + ".f32")));
  const HierarchySpec used = cluster_n > 0 ? cluster_hierarchy_spec(maps, cluster_n)
                                           : spec.value_or(HierarchySpec::default_spec());
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    write_hierarchy_map(out_dir / (tiles[i] + ".u8"), synthesize_hierarchy_labels(maps[i], used));
  }
  write_json_file(out_dir / "hierarchy.json", used.to_json());
  return used;
}

double normalize_dir(const fs::path& ndsm_dir, const fs::path& out_dir, std::optional<double> norm_constant) {
  const auto tiles = list_tile_ids(ndsm_dir, ".f32");
  std::vector<HeightMap> maps;
  for (const auto& t : tiles) maps.push_back(read_height_map(ndsm_dir / (t + ".f32")));
  const double c = norm_constant ? *norm_constant : compute_norm_constant(maps);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto n = normalize_heights(maps[i], c);
    // Stored as a plain raster; the constant lives in norm.json.
    write_height_map(out_dir / (tiles[i] + ".f32"), HeightMap(n.grid(), n.nodata()));
  }
  write_json_file(out_dir / "norm.json", {{"norm_constant", c}});
  return c;
}

TrainResult train_toy_dir(const fs::path& data_dir, const fs::path& labels_dir, const TrainConfig& cfg,
                          const fs::path& model_out, int workers) {
  const fs::path images_dir = data_dir / "train" / "images";
  const fs::path ndsm_dir = data_dir / "train" / "ndsm";
  const auto tiles = list_tile_ids(images_dir, ".f32");
  if (tiles.empty()) throw Error("no training images in " + images_dir.string());

  std::vector<HeightMap> ndsm(tiles.size());
  std::vector<Image> images(tiles.size());
  std::vector<HierarchyMap> labels(tiles.size());
  parallel_for(tiles.size(), workers, [&](std::size_t i) {
    images[i] = read_image(images_dir / (tiles[i] + ".f32"));
    ndsm[i] = read_height_map(ndsm_dir / (tiles[i] + ".f32"));
    labels[i] = read_hierarchy_map(labels_dir / (tiles[i] + ".u8"));
  });
  const double norm_constant = compute_norm_constant(ndsm);
  std::vector<TrainExample> dataset;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    dataset.push_back({std::move(images[i]), std::move(labels[i]), normalize_heights(ndsm[i], norm_constant)});
  }
  const int n_classes = dataset.front().labels.n_classes();
  auto result = train(ToyDualDecoder<float>::initialized(n_classes, cfg.seed), dataset, cfg);

  json meta{{"norm_constant", norm_constant},
            {"iterations", cfg.iterations},
            {"alpha", cfg.loss.alpha},
            {"beta", cfg.loss.beta}};
  if (fs::exists(labels_dir / "hierarchy.json")) meta["hierarchy"] = read_json_file(labels_dir / "hierarchy.json");
  save_checkpoint(model_out, result.model, meta);
  write_json_file(fs::path(model_out.string() + ".trace.json"), {{"loss_trace", result.loss_trace}});
  return result;
}

void infer_dir(const fs::path& model_path, const fs::path& images_dir, const std::vector<double>& scales,
               const fs::path& out_dir, int workers) {
  json meta;
  const auto model = load_checkpoint(model_path, &meta);
  if (!meta.contains("norm_constant")) throw Error("checkpoint lacks metadata.norm_constant");
  const double norm_constant = meta.at("norm_constant").get<double>();
  const auto tiles = list_tile_ids(images_dir, ".f32");
  for (double s : scales) fs::create_directories(out_dir / scale_dir_name(s));
  fs::create_directories(out_dir / "seg");
  parallel_for(tiles.size(), workers, [&](std::size_t i) {
    const Image img = read_image(images_dir / (tiles[i] + ".f32"));
    const auto out = infer_multiscale(model, img, norm_constant, scales);
    for (std::size_t k = 0; k < scales.size(); ++k) {
      write_height_map(out_dir / scale_dir_name(scales[k]) / (tiles[i] + ".f32"), out.heights[k]);
    }
    write_hierarchy_map(out_dir / "seg" / (tiles[i] + ".u8"), out.seg);
  });
}

void aggregate_dir(const fs::path& infer_dir, const fs::path& out_dir, int workers) {
  const auto dirs = scale_dirs(infer_dir);
  const auto tiles = list_tile_ids(infer_dir / "seg", ".u8");
  fs::create_directories(out_dir);
  parallel_for(tiles.size(), workers, [&](std::size_t i) {
    const auto seg = read_hierarchy_map(infer_dir / "seg" / (tiles[i] + ".u8"));
    std::vector<HeightMap> preds;
    for (const auto& d : dirs) preds.push_back(read_height_map(d / (tiles[i] + ".f32")));
    write_height_map(out_dir / (tiles[i] + ".f32"), aggregate_multiscale(preds, seg.width(), seg.height()));
  });
}

void correct_dir(const fs::path& heights_dir, const fs::path& seg_dir, double min_height, const fs::path& out_dir,
                 int workers) {
  const auto tiles = list_tile_ids(heights_dir, ".f32");
  fs::create_directories(out_dir);
  parallel_for(tiles.size(), workers, [&](std::size_t i) {
    const auto h = read_height_map(heights_dir / (tiles[i] + ".f32"));
    const auto s = read_hierarchy_map(seg_dir / (tiles[i] + ".u8"));
    write_height_map(out_dir / (tiles[i] + ".f32"), correct_heights(h, s, min_height));
  });
}

std::map<std::string, std::vector<InstanceSet>> load_instance_sets(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    if (e.path().stem().extension() == ".f32" || e.path().stem().extension() == ".u8") continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::vector<InstanceSet>> by_tile;
  for (const auto& f : files) {
    auto set = read_instance_set(f);
    by_tile[set.tile_id].push_back(std::move(set));
  }
  return by_tile;
}

void fuse_dir(const fs::path& inputs_dir, const FusionConfig& cfg, const fs::path& out_dir, int workers) {
  const auto by_tile = load_instance_sets(inputs_dir);
  std::vector<const std::pair<const std::string, std::vector<InstanceSet>>*> items;
  for (const auto& kv : by_tile) items.push_back(&kv);
  fs::create_directories(out_dir);
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const auto& [tile, sets] = *items[i];
    const auto fused = wsf(sets, cfg);
    write_json_file(out_dir / (tile + ".json"),
                    fused_to_json(tile, "wsf", sets.front().width, sets.front().height, fused));
  });
}

std::string manifest_hash(const json& manifest) {
  json core;
  core["config"] = manifest.value("config", json::object());
  core["metrics"] = manifest.value("metrics", json::object());
  core["stages"] = json::array();
  for (const auto& s : manifest.value("stages", json::array())) {
    core["stages"].push_back({{"name", s.at("name")}, {"hash", s.at("hash")}});
  }
  const std::string text = core.dump();
  return fnv1a_hex(std::vector<std::uint8_t>(text.begin(), text.end()));
}

nlohmann::json run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  fs::remove(out_dir / "manifest.json");
  const int workers = effective_workers(cfg.workers);
  StageRunner runner(out_dir);
  json metrics = json::object();
  const fs::path data = out_dir / "data";

  runner.run("gen-synthetic", data, [&] { generate_split(cfg.scene, cfg.n_train, cfg.n_val, data); });

  if (cfg.pipeline == "height") {
    const fs::path labels = out_dir / "labels";
    const fs::path model_dir = out_dir / "model";
    const fs::path infer = out_dir / "infer";
    const fs::path aggregated = out_dir / "aggregate";
    const fs::path corrected = out_dir / "correct";
    const fs::path eval = out_dir / "eval";

    runner.run("synth-labels", labels, [&] {
      synth_labels_dir(data / "train" / "ndsm", cfg.hierarchy, cfg.cluster_classes, labels);
    });
    runner.run("train-toy", model_dir, [&] {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      const auto r = train_toy_dir(data, labels, tc, model_dir / "model.bin", workers);
      metrics["initial_train_loss"] = r.loss_trace.front();
      metrics["final_train_loss"] = r.loss_trace.back();
    });
    runner.run("infer", infer, [&] { infer_dir(model_dir / "model.bin", data / "val" / "images", cfg.scales, infer, workers); });
    runner.run("aggregate", aggregated, [&] { aggregate_dir(infer, aggregated, workers); });
    fs::path final_heights = aggregated;
    if (cfg.correct) {
      runner.run("correct", corrected, [&] { correct_dir(aggregated, infer / "seg", cfg.min_height, corrected, workers); });
      final_heights = corrected;
    } else {
      fs::remove_all(corrected);
      runner.skip("correct");
    }
    runner.run("eval-height", eval, [&] {
      EvalOptions opts{cfg.eps, cfg.allow_partial};
      const auto report = evaluate_heights(final_heights, data / "val" / "ndsm", opts);
      EvalReport er;
      er.delta = report;
      write_json_file(eval / "height.json", er.to_json());
      metrics["delta1"] = report.delta1;
      metrics["delta2"] = report.delta2;
      metrics["delta3"] = report.delta3;
      metrics["evaluated_pixels"] = report.evaluated_pixels;
    });
  } else {
    const fs::path detections = out_dir / "detections";
    const fs::path fused = out_dir / "fused";
    const fs::path nms = out_dir / "nms";
    const fs::path eval = out_dir / "eval";
    const fs::path gt_dir = data / "val" / "instances";

    runner.run("simulate-detectors", detections, [&] {
      const auto tiles = list_tile_ids(gt_dir, ".json");
      for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
        const auto& spec = cfg.detectors[d];
        for (const auto& t : tiles) {
          const auto gt = read_instance_set(gt_dir / (t + ".json"));
          write_instance_set(detections / spec.model_id / (t + ".json"),
                             simulate_detector(gt, spec.noise, cfg.seed, spec.model_id, spec.weight));
        }
      }
    });
    runner.run("fuse", fused, [&] { fuse_dir(detections, cfg.fusion, fused, workers); });
    runner.run("nms-baseline", nms, [&] {
      fs::create_directories(nms);
      for (const auto& [tile, sets] : load_instance_sets(detections)) {
        write_json_file(nms / (tile + ".json"), fused_to_json(tile, "nms", sets.front().width, sets.front().height,
                                                              nms_baseline(sets, cfg.fusion.iou_threshold)));
      }
    });
    runner.run("eval-instances", eval, [&] {
      EvalOptions opts{cfg.eps, cfg.allow_partial};
      EvalReport er;
      er.ap = evaluate_instances(fused, gt_dir, opts, &er.missing_tiles);
      write_json_file(eval / "instances.json", er.to_json());
      metrics["ap50"] = er.ap->ap50;
      metrics["map"] = er.ap->map;
      metrics["nms_ap50"] = evaluate_instances(nms, gt_dir, opts).ap50;
      json singles = json::object();
      for (const auto& spec : cfg.detectors) {
        singles[spec.model_id] = evaluate_instances(detections / spec.model_id, gt_dir, opts).ap50;
      }
      metrics["single_ap50"] = singles;
    });
  }

  json manifest;
  manifest["config"] = cfg.to_json();
  manifest["stages"] = runner.to_json();
  manifest["metrics"] = metrics;
  manifest["manifest_hash"] = manifest_hash(manifest);
  write_json_file(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace hgd
