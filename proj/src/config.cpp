// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/config.hpp"

#include "hgd/raster_io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>

namespace hgd {

namespace {

class Checker {
 public:
  explicit Checker(std::vector<ConfigError>& errors) : errors_(errors) {}

  void fail(const std::string& ptr, const std::string& msg) { errors_.push_back({ptr, msg}); }

  // Returns false (and records errors) when `j` is not an object or has unknown keys.
  bool object(const json& j, const std::string& ptr, const std::set<std::string>& keys) {
    if (!j.is_object()) {
      fail(ptr.empty() ? "/" : ptr, "must be an object");
      return false;
    }
    bool ok = true;
    for (const auto& [k, v] : j.items()) {
      if (!keys.contains(k)) {
        fail(ptr + "/" + k, "unknown key");
        ok = false;
      }
    }
    return ok;
  }

  void number(const json& j, const std::string& key, const std::string& ptr, double& out,
              const std::function<bool(double)>& valid, const std::string& rule) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) return fail(ptr + "/" + key, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d) || !valid(d)) return fail(ptr + "/" + key, rule);
    out = d;
  }

  void integer(const json& j, const std::string& key, const std::string& ptr, int& out, int min, int max) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) return fail(ptr + "/" + key, "must be an integer");
    const auto d = v.get<long long>();
    if (d < min || d > max) {
      return fail(ptr + "/" + key, "must lie in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
    }
    out = static_cast<int>(d);
  }

  void boolean(const json& j, const std::string& key, const std::string& ptr, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) return fail(ptr + "/" + key, "must be a boolean");
    out = j.at(key).get<bool>();
  }

  bool number_array(const json& j, const std::string& ptr, std::vector<double>& out, std::size_t min_len) {
    if (!j.is_array()) {
      fail(ptr, "must be an array of numbers");
      return false;
    }
    std::vector<double> vals;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) {
        fail(ptr + "/" + std::to_string(i), "must be a number");
        return false;
      }
      vals.push_back(j[i].get<double>());
    }
    if (vals.size() < min_len) {
      fail(ptr, "needs at least " + std::to_string(min_len) + " entries");
      return false;
    }
    out = std::move(vals);
    return true;
  }

 private:
  std::vector<ConfigError>& errors_;
};

const auto non_negative = [](double v) { return v >= 0.0; };
const auto unit_open = [](double v) { return v > 0.0 && v < 1.0; };

void check_scene(Checker& c, const json& j, const std::string& ptr, PipelineConfig& cfg) {
  try {
    cfg.scene = SceneConfig::from_json(j);
  } catch (const Error& e) {
    c.fail(ptr, e.what());
  }
}

void check_detectors(Checker& c, const json& j, const std::string& ptr, PipelineConfig& cfg) {
  if (!j.is_array() || j.empty()) return c.fail(ptr, "must be a nonempty array");
  cfg.detectors.clear();
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = ptr + "/" + std::to_string(i);
    const auto& d = j[i];
    if (!c.object(d, p, {"model_id", "weight", "noise"})) continue;
    DetectorSpec spec;
    if (!d.contains("model_id") || !d.at("model_id").is_string()) {
      c.fail(p + "/model_id", "required string");
      continue;
    }
    spec.model_id = d.at("model_id").get<std::string>();
    if (!ids.insert(spec.model_id).second) c.fail(p + "/model_id", "duplicate model id");
    c.number(d, "weight", p, spec.weight, non_negative, "must be >= 0");
    if (d.contains("noise")) {
      try {
        spec.noise = DetectorNoise::from_json(d.at("noise"));
      } catch (const std::exception& e) {
        c.fail(p + "/noise", e.what());
      }
    }
    cfg.detectors.push_back(std::move(spec));
  }
}

}  // namespace

std::vector<DetectorSpec> default_detectors() {
  std::vector<DetectorSpec> out;
  const double flips[3] = {0.25, 0.3, 0.35};
  const double misses[3] = {0.12, 0.15, 0.18};
  for (int k = 0; k < 3; ++k) {
    DetectorSpec d;
    d.model_id = "detector_" + std::to_string(k);
    d.noise.boundary_flip = flips[k];
    d.noise.miss_rate = misses[k];
    out.push_back(d);
  }
  return out;
}

ConfigValidation validate_config(const json& doc) {
  ConfigValidation result;
  PipelineConfig cfg;
  cfg.detectors = default_detectors();
  Checker c(result.errors);

  const json empty = json::object();
  const json& root = doc.is_null() ? empty : doc;
  if (!c.object(root, "", {"pipeline", "seed", "workers", "data", "hierarchy", "loss", "train", "infer", "correct",
                           "eval", "fusion", "detectors"}) &&
      !root.is_object()) {
    return result;
  }

  if (root.contains("pipeline")) {
    const auto& p = root.at("pipeline");
    if (!p.is_string() || (p.get<std::string>() != "height" && p.get<std::string>() != "extraction")) {
      c.fail("/pipeline", "must be \"height\" or \"extraction\"");
    } else {
      cfg.pipeline = p.get<std::string>();
    }
  }
  if (root.contains("seed")) {
    const auto& s = root.at("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      c.fail("/seed", "must be a non-negative integer");
    } else {
      cfg.seed = s.get<std::uint64_t>();
    }
  }
  c.integer(root, "workers", "", cfg.workers, 0, 4096);

  if (root.contains("data")) {
    const auto& d = root.at("data");
    if (c.object(d, "/data", {"scene", "train", "val"}) || d.is_object()) {
      if (d.contains("scene")) check_scene(c, d.at("scene"), "/data/scene", cfg);
      c.integer(d, "train", "/data", cfg.n_train, 1, 1 << 20);
      c.integer(d, "val", "/data", cfg.n_val, 1, 1 << 20);
    }
  }

  if (root.contains("hierarchy")) {
    const auto& h = root.at("hierarchy");
    if (c.object(h, "/hierarchy", {"boundaries", "names", "cluster"}) || h.is_object()) {
      if (h.contains("boundaries")) {
        std::vector<double> b;
        if (c.number_array(h.at("boundaries"), "/hierarchy/boundaries", b, 3)) {
          std::vector<std::string> names;
          if (h.contains("names")) {
            if (!h.at("names").is_array()) c.fail("/hierarchy/names", "must be an array of strings");
            else {
              for (const auto& n : h.at("names")) names.push_back(n.is_string() ? n.get<std::string>() : "");
            }
          }
          try {
            cfg.hierarchy = HierarchySpec(b, names);
          } catch (const Error& e) {
            const std::string msg = e.what();
            c.fail(msg.find("names") != std::string::npos ? "/hierarchy/names" : "/hierarchy/boundaries", msg);
          }
        }
      } else if (h.contains("names")) {
        c.fail("/hierarchy/names", "names require explicit boundaries");
      }
      c.integer(h, "cluster", "/hierarchy", cfg.cluster_classes, 2, 256);
      if (h.contains("cluster") && h.contains("boundaries")) c.fail("/hierarchy", "give either boundaries or cluster");
    }
  }

  if (root.contains("loss")) {
    const auto& l = root.at("loss");
    if (c.object(l, "/loss", {"alpha", "beta"}) || l.is_object()) {
      c.number(l, "alpha", "/loss", cfg.train.loss.alpha, non_negative, "must be >= 0");
      c.number(l, "beta", "/loss", cfg.train.loss.beta, non_negative, "must be >= 0");
      if (cfg.train.loss.alpha == 0.0 && cfg.train.loss.beta == 0.0) c.fail("/loss", "alpha and beta cannot both be 0");
    }
  }

  if (root.contains("train")) {
    const auto& t = root.at("train");
    if (c.object(t, "/train", {"learning_rate", "iterations", "batch_size", "scale_jitter", "rotate", "poly_power"}) ||
        t.is_object()) {
      c.number(t, "learning_rate", "/train", cfg.train.learning_rate, non_negative, "must be >= 0");
      c.integer(t, "iterations", "/train", cfg.train.iterations, 1, 10'000'000);
      c.integer(t, "batch_size", "/train", cfg.train.batch_size, 1, 4096);
      if (t.contains("scale_jitter")) {
        std::vector<double> r;
        if (c.number_array(t.at("scale_jitter"), "/train/scale_jitter", r, 2)) {
          if (r.size() != 2 || !(r[0] > 0.0) || !(r[1] >= r[0])) {
            c.fail("/train/scale_jitter", "must be [min, max] with 0 < min <= max");
          } else {
            cfg.train.scale_min = r[0];
            cfg.train.scale_max = r[1];
          }
        }
      }
      c.boolean(t, "rotate", "/train", cfg.train.rotate);
      c.number(t, "poly_power", "/train", cfg.train.poly_power, non_negative, "must be >= 0");
    }
  }

  if (root.contains("infer")) {
    const auto& i = root.at("infer");
    if (c.object(i, "/infer", {"scales"}) || i.is_object()) {
      if (i.contains("scales")) {
        std::vector<double> s;
        if (c.number_array(i.at("scales"), "/infer/scales", s, 1)) {
          bool ok = true;
          for (std::size_t k = 0; k < s.size(); ++k) {
            if (!(s[k] > 0.0)) {
              c.fail("/infer/scales/" + std::to_string(k), "must be > 0");
              ok = false;
            }
          }
          if (ok) cfg.scales = s;
        }
      }
    }
  }

  if (root.contains("correct")) {
    const auto& k = root.at("correct");
    if (c.object(k, "/correct", {"enabled", "min_height"}) || k.is_object()) {
      c.boolean(k, "enabled", "/correct", cfg.correct);
      c.number(k, "min_height", "/correct", cfg.min_height, non_negative, "must be >= 0");
    }
  }

  if (root.contains("eval")) {
    const auto& e = root.at("eval");
    if (c.object(e, "/eval", {"eps", "allow_partial"}) || e.is_object()) {
      c.number(e, "eps", "/eval", cfg.eps, non_negative, "must be >= 0");
      c.boolean(e, "allow_partial", "/eval", cfg.allow_partial);
    }
  }

  if (root.contains("fusion")) {
    const auto& f = root.at("fusion");
    if (c.object(f, "/fusion", {"iou_threshold", "skip_box_threshold", "mask_threshold", "score_mode"}) ||
        f.is_object()) {
      c.number(f, "iou_threshold", "/fusion", cfg.fusion.iou_threshold,
               [](double v) { return v > 0.0 && v <= 1.0; }, "must lie in (0, 1]");
      c.number(f, "skip_box_threshold", "/fusion", cfg.fusion.skip_box_threshold,
               [](double v) { return v >= 0.0 && v <= 1.0; }, "must lie in [0, 1]");
      c.number(f, "mask_threshold", "/fusion", cfg.fusion.mask_threshold, unit_open, "must lie in (0, 1)");
      if (f.contains("score_mode")) {
        try {
          if (!f.at("score_mode").is_string()) throw Error("must be a string");
          cfg.fusion.score_mode = score_mode_from_string(f.at("score_mode").get<std::string>());
        } catch (const Error&) {
          c.fail("/fusion/score_mode", "must be \"average\" or \"weighted-average\"");
        }
      }
    }
  }

  if (root.contains("detectors")) check_detectors(c, root.at("detectors"), "/detectors", cfg);

  cfg.train.seed = cfg.seed;
  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

ConfigValidation validate_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigValidation r;
    r.errors.push_back({"", "cannot open " + path.string()});
    return r;
  }
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return validate_config(json::object());
  try {
    return validate_config(json::parse(text));
  } catch (const json::parse_error& e) {
    ConfigValidation r;
    r.errors.push_back({"", std::string("malformed JSON: ") + e.what()});
    return r;
  }
}

json PipelineConfig::to_json() const {
  json detectors_json = json::array();
  for (const auto& d : detectors) {
    detectors_json.push_back({{"model_id", d.model_id}, {"weight", d.weight}, {"noise", d.noise.to_json()}});
  }
  json hierarchy_json = hierarchy.to_json();
  if (cluster_classes > 0) hierarchy_json = {{"cluster", cluster_classes}};
  return {{"pipeline", pipeline},
          {"seed", seed},
          {"workers", workers},
          {"data", {{"scene", scene.to_json()}, {"train", n_train}, {"val", n_val}}},
          {"hierarchy", hierarchy_json},
          {"loss", {{"alpha", train.loss.alpha}, {"beta", train.loss.beta}}},
          {"train",
           {{"learning_rate", train.learning_rate},
            {"iterations", train.iterations},
            {"batch_size", train.batch_size},
            {"scale_jitter", {train.scale_min, train.scale_max}},
            {"rotate", train.rotate},
            {"poly_power", train.poly_power}}},
          {"infer", {{"scales", scales}}},
          {"correct", {{"enabled", correct}, {"min_height", min_height}}},
          {"eval", {{"eps", eps}, {"allow_partial", allow_partial}}},
          {"fusion",
           {{"iou_threshold", fusion.iou_threshold},
            {"skip_box_threshold", fusion.skip_box_threshold},
            {"mask_threshold", fusion.mask_threshold},
            {"score_mode", to_string(fusion.score_mode)}}},
          {"detectors", detectors_json}};
}

}  // namespace hgd
