// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point. Every subcommand reads and writes files only.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hgd/config.hpp"
#include "hgd/pipeline.hpp"
#include "hgd/postproc.hpp"
#include "hgd/raster_io.hpp"
#include "hgd/synth.hpp"

namespace {

using hgd::fs::path;
using hgd::json;

hgd::PipelineConfig load_config(const std::optional<std::string>& file) {
  const auto v = file ? hgd::validate_config_file(*file) : hgd::validate_config(json::object());
  if (!v.ok()) {
    std::string msg = "invalid config";
    for (const auto& e : v.errors) msg += "\n  " + (e.pointer.empty() ? std::string("/") : e.pointer) + ": " + e.message;
    throw hgd::Error(msg);
  }
  auto cfg = *v.config;
  hgd::apply_environment(cfg);
  return cfg;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::pair<int, int> parse_size(const std::string& s) {
  int w = 0, h = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%dx%d%c", &w, &h, &tail) == 2) return {w, h};
  if (std::sscanf(s.c_str(), "%d%c", &w, &tail) == 1) return {w, w};
  throw hgd::Error("size must be N or WxH: " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Height estimation and instance fusion toolkit"};
  app.require_subcommand(1);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a procedural train/val tile split");
  std::optional<std::string> gen_config;
  int gen_train = 64, gen_val = 16;
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config", gen_config, "Scene config JSON");
  gen->add_option("--train", gen_train)->check(CLI::NonNegativeNumber);
  gen->add_option("--val", gen_val)->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_seed, "Overrides the scene seed");
  gen->add_option("--out", gen_out)->required();

  // synth-labels
  auto* labels = app.add_subcommand("synth-labels", "Bin nDSM rasters into hierarchy maps");
  std::string labels_ndsm, labels_out;
  std::optional<std::string> labels_spec;
  int labels_cluster = 0;
  labels->add_option("--ndsm-dir", labels_ndsm)->required();
  auto* spec_opt = labels->add_option("--spec", labels_spec, "Hierarchy spec JSON");
  labels->add_option("--cluster", labels_cluster, "Derive n classes by clustering")->excludes(spec_opt);
  labels->add_option("--out-dir", labels_out)->required();

  // normalize
  auto* norm = app.add_subcommand("normalize", "Log-normalize nDSM rasters");
  std::string norm_in, norm_out;
  std::optional<double> norm_constant;
  norm->add_option("--ndsm-dir", norm_in)->required();
  norm->add_option("--norm-constant", norm_constant);
  norm->add_option("--out-dir", norm_out)->required();

  // train-toy
  auto* train = app.add_subcommand("train-toy", "Train the toy dual-decoder");
  std::string train_data, train_out;
  std::optional<std::string> train_config, train_labels;
  train->add_option("--data", train_data, "Directory from gen-synthetic")->required();
  train->add_option("--config", train_config, "Run config JSON");
  train->add_option("--labels", train_labels, "Hierarchy maps; synthesized from the nDSM when omitted");
  train->add_option("--out", train_out)->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  std::uint64_t grad_seed = 0;
  int grad_size = 6, grad_classes = 4;
  double grad_alpha = 5.0, grad_beta = 30.0, grad_tol = 1e-4;
  grad->add_option("--seed", grad_seed);
  grad->add_option("--size", grad_size)->check(CLI::PositiveNumber);
  grad->add_option("--classes", grad_classes);
  grad->add_option("--alpha", grad_alpha);
  grad->add_option("--beta", grad_beta);
  grad->add_option("--tolerance", grad_tol);

  // infer
  auto* infer = app.add_subcommand("infer", "Multi-scale inference over an image directory");
  std::string infer_model, infer_images, infer_out;
  std::vector<double> infer_scales{1.0};
  infer->add_option("--model", infer_model)->required();
  infer->add_option("--images", infer_images)->required();
  infer->add_option("--scales", infer_scales)->expected(1, -1);
  infer->add_option("--out", infer_out)->required();

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Max-aggregate multi-scale height rasters");
  std::vector<std::string> agg_inputs;
  std::optional<std::string> agg_size;
  std::string agg_out;
  agg->add_option("--inputs", agg_inputs, "Rasters, or one infer directory")->required()->expected(1, -1);
  agg->add_option("--size", agg_size, "N or WxH; required for raster inputs");
  agg->add_option("--out", agg_out)->required();

  // correct
  auto* corr = app.add_subcommand("correct", "Zero low heights on ground-class pixels");
  std::string corr_heights, corr_seg, corr_out;
  double corr_min = hgd::kDefaultMinBuildingHeight;
  corr->add_option("--heights", corr_heights, "Raster or directory")->required();
  corr->add_option("--seg", corr_seg, "Raster or directory")->required();
  corr->add_option("--min-h", corr_min);
  corr->add_option("--out", corr_out)->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Weighted segmentation fusion of instance sets");
  std::string fuse_in, fuse_out, fuse_mode = "weighted-average";
  hgd::FusionConfig fuse_cfg;
  fuse->add_option("--inputs", fuse_in)->required();
  fuse->add_option("--iou", fuse_cfg.iou_threshold);
  fuse->add_option("--skip", fuse_cfg.skip_box_threshold);
  fuse->add_option("--mask-threshold", fuse_cfg.mask_threshold);
  fuse->add_option("--score-mode", fuse_mode)->check(CLI::IsMember({"average", "weighted-average"}));
  fuse->add_option("--out", fuse_out)->required();

  // eval-height / eval-instances
  auto* evh = app.add_subcommand("eval-height", "Threshold accuracy of predicted heights");
  auto* evi = app.add_subcommand("eval-instances", "Mask AP of predicted instances");
  std::string ev_pred, ev_gt;
  std::optional<std::string> ev_out;
  hgd::EvalOptions ev_opts;
  for (auto* sc : {evh, evi}) {
    sc->add_option("--pred", ev_pred)->required();
    sc->add_option("--gt", ev_gt)->required();
    sc->add_flag("--allow-partial", ev_opts.allow_partial);
    sc->add_option("--out", ev_out, "Also write the report here");
  }
  evh->add_option("--eps", ev_opts.eps);

  // run-pipeline
  auto* run = app.add_subcommand("run-pipeline", "Run a configured stage chain");
  std::optional<std::string> run_config;
  std::string run_out;
  run->add_option("--config", run_config);
  run->add_option("--out", run_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto scene = gen_config ? hgd::SceneConfig::from_json(hgd::read_json_file(*gen_config)) : hgd::SceneConfig{};
      if (gen_seed) scene.seed = *gen_seed;
      print_json(hgd::generate_split(scene, gen_train, gen_val, gen_out));
    } else if (*labels) {
      std::optional<hgd::HierarchySpec> spec;
      if (labels_spec) spec = hgd::HierarchySpec::from_json(hgd::read_json_file(*labels_spec));
      print_json(hgd::synth_labels_dir(labels_ndsm, spec, labels_cluster, labels_out).to_json());
    } else if (*norm) {
      print_json({{"norm_constant", hgd::normalize_dir(norm_in, norm_out, norm_constant)}});
    } else if (*train) {
      const auto cfg = load_config(train_config);
      path labels_dir = train_labels ? path(*train_labels) : path(train_out + ".labels");
      if (!train_labels) hgd::synth_labels_dir(path(train_data) / "train" / "ndsm", cfg.hierarchy, cfg.cluster_classes, labels_dir);
      auto tc = cfg.train;
      tc.seed = cfg.seed;
      const auto r = hgd::train_toy_dir(train_data, labels_dir, tc, train_out, cfg.workers);
      print_json({{"initial_loss", r.loss_trace.front()}, {"final_loss", r.loss_trace.back()}, {"checkpoint", train_out}});
    } else if (*grad) {
      hgd::LossWeights w{grad_alpha, grad_beta};
      w.validate();
      const auto r = hgd::gradcheck(grad_seed, grad_size, w, grad_classes);
      print_json({{"max_relative_error", r.max_relative_error},
                  {"worst_layer", r.worst_layer},
                  {"worst_index", r.worst_index},
                  {"checked", r.checked},
                  {"pass", r.max_relative_error < grad_tol}});
      return r.max_relative_error < grad_tol ? 0 : 1;
    } else if (*infer) {
      hgd::PipelineConfig env;
      hgd::apply_environment(env);
      hgd::infer_dir(infer_model, infer_images, infer_scales, infer_out, env.workers);
    } else if (*agg) {
      if (agg_inputs.size() == 1 && hgd::fs::is_directory(agg_inputs.front())) {
        hgd::aggregate_dir(agg_inputs.front(), agg_out, hgd::effective_workers(0));
      } else {
        if (!agg_size) throw hgd::Error("--size is required when aggregating rasters");
        const auto [w, h] = parse_size(*agg_size);
        std::vector<hgd::HeightMap> maps;
        for (const auto& p : agg_inputs) maps.push_back(hgd::read_height_map(p));
        hgd::write_height_map(agg_out, hgd::aggregate_multiscale(maps, w, h));
      }
    } else if (*corr) {
      if (hgd::fs::is_directory(corr_heights)) {
        hgd::correct_dir(corr_heights, corr_seg, corr_min, corr_out, hgd::effective_workers(0));
      } else {
        hgd::write_height_map(corr_out, hgd::correct_heights(hgd::read_height_map(corr_heights),
                                                             hgd::read_hierarchy_map(corr_seg), corr_min));
      }
    } else if (*fuse) {
      fuse_cfg.score_mode = hgd::score_mode_from_string(fuse_mode);
      fuse_cfg.validate();
      hgd::fuse_dir(fuse_in, fuse_cfg, fuse_out, hgd::effective_workers(0));
    } else if (*evh || *evi) {
      hgd::EvalReport report;
      if (*evh) report.delta = hgd::evaluate_heights(ev_pred, ev_gt, ev_opts, &report.missing_tiles);
      else report.ap = hgd::evaluate_instances(ev_pred, ev_gt, ev_opts, &report.missing_tiles);
      const json j = report.to_json();
      if (ev_out) hgd::write_json_file(*ev_out, j);
      print_json(j);
    } else if (*run) {
      const auto cfg = load_config(run_config);
      const auto manifest = hgd::run_pipeline(cfg, run_out);
      print_json({{"manifest_hash", manifest.at("manifest_hash")}, {"metrics", manifest.at("metrics")}});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
