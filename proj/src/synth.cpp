// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "hgd/raster_io.hpp"
#include "hgd/rng.hpp"

namespace hgd {

namespace {

constexpr int kPlacementAttempts = 1000;
constexpr int kTextureCell = 4;

struct Footprint {
  int x, y, w, h;
  double height;

  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  // Overlap test with a one-pixel gap so neighbours stay separable instances.
  bool touches(const Footprint& o) const {
    return x - 1 < o.x + o.w && o.x - 1 < x + w && y - 1 < o.y + o.h && o.y - 1 < y + h;
  }
};

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw Error("unknown key '" + k + "' in " + where);
  }
}

double sample_height(const SceneConfig& cfg, Rng& rng) {
  for (int k = 0; k < kPlacementAttempts; ++k) {
    const double h = std::exp(rng.normal(cfg.height_mu, cfg.height_sigma));
    if (h >= cfg.min_height && h < cfg.max_height) return h;
  }
  return std::clamp(std::exp(cfg.height_mu), cfg.min_height, std::nextafter(cfg.max_height, 0.0));
}

// Bilinear value noise on a coarse lattice, values in [0, 1).
std::vector<double> value_noise(int size, Rng& rng) {
  const int cells = size / kTextureCell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(cells) * cells);
  for (auto& v : lattice) v = rng.uniform();
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) / kTextureCell, fy = static_cast<double>(y) / kTextureCell;
      const int cx = static_cast<int>(fx), cy = static_cast<int>(fy);
      const double tx = fx - cx, ty = fy - cy;
      auto L = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * cells + i]; };
      const double top = L(cx, cy) * (1 - tx) + L(cx + 1, cy) * tx;
      const double bot = L(cx, cy + 1) * (1 - tx) + L(cx + 1, cy + 1) * tx;
      out[static_cast<std::size_t>(y) * size + x] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

BinaryMask shift_mask(const BinaryMask& m, int dx, int dy) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx >= 0 && sy >= 0 && sx < m.width() && sy < m.height()) out(x, y) = m(sx, sy);
    }
  }
  return out;
}

}  // namespace

void SceneConfig::validate() const {
  if (tile_size < 2 || tile_size % 2 != 0) throw Error("tile_size must be even and >= 2");
  if (min_buildings < 0 || max_buildings < min_buildings) throw Error("building count range is empty");
  if (min_footprint < 1 || max_footprint < min_footprint) throw Error("footprint size range is empty");
  if (!(height_sigma >= 0.0)) throw Error("height sigma must be >= 0");
  if (!(min_height >= 0.0) || !(max_height > min_height)) throw Error("height range is empty");
  if (offset_x < 0 || offset_y < 0) throw Error("misalignment offset must be >= 0");
  if (!(noise >= 0.0) || !(ndsm_noise >= 0.0)) throw Error("noise levels must be >= 0");
  if (max_footprint + std::max(offset_x, offset_y) > tile_size) {
    throw Error("footprints plus misalignment offset do not fit in the tile");
  }
}

nlohmann::json SceneConfig::to_json() const {
  return {{"tile_size", tile_size},
          {"buildings", {min_buildings, max_buildings}},
          {"footprint", {min_footprint, max_footprint}},
          {"height", {{"mu", height_mu}, {"sigma", height_sigma}, {"min", min_height}, {"max", max_height}}},
          {"offset", {offset_x, offset_y}},
          {"noise", noise},
          {"ndsm_noise", ndsm_noise},
          {"seed", seed}};
}

SceneConfig SceneConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"tile_size", "buildings", "footprint", "height", "offset", "noise", "ndsm_noise", "seed"},
                 "scene config");
  SceneConfig c;
  try {
    c.tile_size = j.value("tile_size", c.tile_size);
    if (j.contains("buildings")) {
      c.min_buildings = j.at("buildings").at(0).get<int>();
      c.max_buildings = j.at("buildings").at(1).get<int>();
    }
    if (j.contains("footprint")) {
      c.min_footprint = j.at("footprint").at(0).get<int>();
      c.max_footprint = j.at("footprint").at(1).get<int>();
    }
    if (j.contains("height")) {
      const auto& h = j.at("height");
      reject_unknown(h, {"mu", "sigma", "min", "max"}, "scene config height");
      c.height_mu = h.value("mu", c.height_mu);
      c.height_sigma = h.value("sigma", c.height_sigma);
      c.min_height = h.value("min", c.min_height);
      c.max_height = h.value("max", c.max_height);
    }
    if (j.contains("offset")) {
      c.offset_x = j.at("offset").at(0).get<int>();
      c.offset_y = j.at("offset").at(1).get<int>();
    }
    c.noise = j.value("noise", c.noise);
    c.ndsm_noise = j.value("ndsm_noise", c.ndsm_noise);
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
        throw Error("scene seed must be a non-negative integer");
      }
      c.seed = s.get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed scene config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string tile_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tile_%04d", index);
  return buf;
}

SyntheticTile generate_tile(const SceneConfig& cfg, int index) {
  cfg.validate();
  if (index < 0) throw Error("tile index must be >= 0");
  Rng rng(cfg.seed, static_cast<std::uint64_t>(index));
  const int n = cfg.tile_size;
  const int count = rng.uniform_int(cfg.min_buildings, cfg.max_buildings);

  std::vector<Footprint> buildings;
  for (int b = 0; b < count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Footprint f;
      f.w = rng.uniform_int(cfg.min_footprint, cfg.max_footprint);
      f.h = rng.uniform_int(cfg.min_footprint, cfg.max_footprint);
      f.x = rng.uniform_int(0, n - f.w - cfg.offset_x);
      f.y = rng.uniform_int(0, n - f.h - cfg.offset_y);
      f.height = 0.0;
      placed = std::none_of(buildings.begin(), buildings.end(), [&](const Footprint& o) { return f.touches(o); });
      if (placed) {
        f.height = sample_height(cfg, rng);
        buildings.push_back(f);
      }
    }
    if (!placed) {
      throw Error("generate_tile: could not place building " + std::to_string(b + 1) + " of " +
                  std::to_string(count) + " without overlap");
    }
  }

  SyntheticTile tile;
  tile.tile_id = tile_name(index);

  // nDSM
  std::vector<float> ndsm(static_cast<std::size_t>(n) * n, 0.0f);
  std::vector<int> owner(ndsm.size(), -1);
  for (std::size_t b = 0; b < buildings.size(); ++b) {
    const auto& f = buildings[b];
    for (int y = f.y; y < f.y + f.h; ++y) {
      for (int x = f.x; x < f.x + f.w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        owner[i] = static_cast<int>(b);
        double v = f.height;
        if (cfg.ndsm_noise > 0.0) v = std::max(0.0, v + rng.normal(0.0, cfg.ndsm_noise));
        float fv = static_cast<float>(v);
        if (fv >= cfg.max_height) fv = std::nextafter(static_cast<float>(cfg.max_height), 0.0f);
        ndsm[i] = fv;
      }
    }
  }
  tile.ndsm = HeightMap(n, n, std::move(ndsm));

  // Image: textured ground, cast shadows toward +x/+y, roofs whose tint encodes height.
  tile.image = Image(3, n, n);
  const auto texture = value_noise(n, rng);
  std::vector<double> shade(static_cast<std::size_t>(n) * n, 1.0);
  for (const auto& f : buildings) {
    const int len = std::max(1, static_cast<int>(std::lround(f.height / 6.0)));
    for (int y = f.y; y < std::min(n, f.y + f.h + len); ++y) {
      for (int x = f.x; x < std::min(n, f.x + f.w + len); ++x) {
        if (f.contains(x, y)) continue;
        // Diagonal sweep of the footprint by up to `len` pixels.
        for (int k = 1; k <= len; ++k) {
          if (f.contains(x - k, y - k)) {
            shade[static_cast<std::size_t>(y) * n + x] = 0.55;
            break;
          }
        }
      }
    }
  }
  const double log_top = std::log1p(cfg.max_height);
  std::vector<double> tint(buildings.size());
  for (auto& t : tint) t = rng.uniform(-0.03, 0.03);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      double rgb[3];
      if (owner[i] >= 0) {
        const auto& f = buildings[static_cast<std::size_t>(owner[i])];
        const double t = std::log1p(f.height) / log_top;
        const bool edge = x == f.x || y == f.y || x == f.x + f.w - 1 || y == f.y + f.h - 1;
        const double bevel = edge ? 0.05 : 0.0;
        const double tn = tint[static_cast<std::size_t>(owner[i])];
        rgb[0] = 0.25 + 0.70 * t + bevel + tn;
        rgb[1] = 0.55 - 0.25 * t + bevel + tn;
        rgb[2] = 0.75 - 0.55 * t + bevel + tn;
      } else {
        const double tex = texture[i];
        rgb[0] = (0.30 + 0.10 * tex) * shade[i];
        rgb[1] = (0.38 + 0.12 * tex) * shade[i];
        rgb[2] = (0.22 + 0.08 * tex) * shade[i];
      }
      for (int c = 0; c < 3; ++c) {
        const double v = rgb[c] + (cfg.noise > 0.0 ? rng.normal(0.0, cfg.noise) : 0.0);
        tile.image.at(c, x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  // Instance footprints, shifted by the misalignment offset.
  tile.instances.tile_id = tile.tile_id;
  tile.instances.model_id = "ground_truth";
  tile.instances.model_weight = 1.0;
  tile.instances.width = n;
  tile.instances.height = n;
  for (const auto& f : buildings) {
    BinaryMask m(n, n);
    for (int y = f.y; y < f.y + f.h; ++y) {
      for (int x = f.x; x < f.x + f.w; ++x) m(x + cfg.offset_x, y + cfg.offset_y) = 1;
    }
    BBox box{static_cast<double>(f.x + cfg.offset_x), static_cast<double>(f.y + cfg.offset_y),
             static_cast<double>(f.x + f.w + cfg.offset_x), static_cast<double>(f.y + f.h + cfg.offset_y), 1.0};
    tile.instances.instances.push_back({box, std::move(m)});
  }
  return tile;
}

nlohmann::json generate_split(const SceneConfig& cfg, int n_train, int n_val, const std::filesystem::path& out) {
  cfg.validate();
  if (n_train < 1 || n_val < 1) throw Error("generate_split: split sizes must be >= 1");
  json manifest;
  manifest["config"] = cfg.to_json();
  manifest["n_train"] = n_train;
  manifest["n_val"] = n_val;
  auto emit = [&](const std::string& split, int first, int count) {
    json entries = json::array();
    for (int i = first; i < first + count; ++i) {
      const auto tile = generate_tile(cfg, i);
      const std::string img = split + "/images/" + tile.tile_id + ".f32";
      const std::string ndsm = split + "/ndsm/" + tile.tile_id + ".f32";
      const std::string inst = split + "/instances/" + tile.tile_id + ".json";
      write_image(out / img, tile.image);
      write_height_map(out / ndsm, tile.ndsm);
      write_instance_set(out / inst, tile.instances);
      entries.push_back({{"tile_id", tile.tile_id}, {"index", i}, {"image", img}, {"ndsm", ndsm}, {"instances", inst}});
    }
    manifest[split] = entries;
  };
  emit("train", 0, n_train);
  emit("val", n_train, n_val);
  write_json_file(out / "manifest.json", manifest);
  return manifest;
}

nlohmann::json DetectorNoise::to_json() const {
  return {{"miss_rate", miss_rate},       {"false_positives", false_positives}, {"max_shift", max_shift},
          {"boundary_flip", boundary_flip}, {"box_jitter", box_jitter},           {"score_noise", score_noise}};
}

DetectorNoise DetectorNoise::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"miss_rate", "false_positives", "max_shift", "boundary_flip", "box_jitter", "score_noise"},
                 "detector noise");
  DetectorNoise d;
  d.miss_rate = j.value("miss_rate", d.miss_rate);
  d.false_positives = j.value("false_positives", d.false_positives);
  d.max_shift = j.value("max_shift", d.max_shift);
  d.boundary_flip = j.value("boundary_flip", d.boundary_flip);
  d.box_jitter = j.value("box_jitter", d.box_jitter);
  d.score_noise = j.value("score_noise", d.score_noise);
  return d;
}

InstanceSet simulate_detector(const InstanceSet& ground_truth, const DetectorNoise& noise, std::uint64_t seed,
                              const std::string& model_id, double model_weight) {
  const std::string key = ground_truth.tile_id + "/" + model_id;
  const std::vector<std::uint8_t> key_bytes(key.begin(), key.end());
  Rng rng(seed, std::stoull(fnv1a_hex(key_bytes), nullptr, 16));
  const int w = ground_truth.width, h = ground_truth.height;
  InstanceSet out;
  out.tile_id = ground_truth.tile_id;
  out.model_id = model_id;
  out.model_weight = model_weight;
  out.width = w;
  out.height = h;

  auto jittered_box = [&](const BBox& b, double score) {
    double c[4] = {b.x_min, b.y_min, b.x_max, b.y_max};
    for (double& v : c) v += rng.normal(0.0, noise.box_jitter);
    BBox r{std::clamp(std::min(c[0], c[2]), 0.0, static_cast<double>(w)),
           std::clamp(std::min(c[1], c[3]), 0.0, static_cast<double>(h)),
           std::clamp(std::max(c[0], c[2]), 0.0, static_cast<double>(w)),
           std::clamp(std::max(c[1], c[3]), 0.0, static_cast<double>(h)), score};
    return r;
  };
  // Mask heads predict inside their box, so the mask is confined to it.
  auto crop = [&](BinaryMask& m, const BBox& b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!b.contains_pixel_center(x, y)) m(x, y) = 0;
      }
    }
    return mask_area(m) > 0;
  };

  for (const auto& inst : ground_truth.instances) {
    if (rng.uniform() < noise.miss_rate) continue;
    const BinaryMask gt = to_binary(inst.mask);
    BinaryMask m = shift_mask(gt, rng.uniform_int(-noise.max_shift, noise.max_shift),
                              rng.uniform_int(-noise.max_shift, noise.max_shift));
    BinaryMask flipped = m;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool boundary = false;
        const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nb) {
          const int nx = x + d[0], ny = y + d[1];
          const std::uint8_t v = (nx >= 0 && ny >= 0 && nx < w && ny < h) ? m(nx, ny) : 0;
          boundary |= v != m(x, y);
        }
        if (boundary && rng.uniform() < noise.boundary_flip) flipped(x, y) = m(x, y) ? 0 : 1;
      }
    }
    const auto bounds = mask_bounds(flipped);
    if (!bounds) continue;
    const BBox box = jittered_box(*bounds, 0.0);
    if (!crop(flipped, box)) continue;
    const double quality = iou_mask(flipped, gt);
    const double score = std::clamp(0.3 + 0.6 * quality + rng.normal(0.0, noise.score_noise), 0.01, 0.99);
    out.instances.push_back({BBox{box.x_min, box.y_min, box.x_max, box.y_max, score}, std::move(flipped)});
  }

  int n_fp = static_cast<int>(std::floor(noise.false_positives));
  if (rng.uniform() < noise.false_positives - n_fp) ++n_fp;
  for (int k = 0; k < n_fp; ++k) {
    const int fw = rng.uniform_int(2, std::max(2, w / 5));
    const int fh = rng.uniform_int(2, std::max(2, h / 5));
    const int fx = rng.uniform_int(0, std::max(0, w - fw));
    const int fy = rng.uniform_int(0, std::max(0, h - fh));
    BinaryMask m(w, h);
    for (int y = fy; y < std::min(h, fy + fh); ++y) {
      for (int x = fx; x < std::min(w, fx + fw); ++x) m(x, y) = 1;
    }
    const BBox box = jittered_box(*mask_bounds(m), rng.uniform(0.05, 0.6));
    if (!crop(m, box)) continue;
    out.instances.push_back({box, std::move(m)});
  }
  return out;
}

}  // namespace hgd
