// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/raster_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>

namespace hgd {

namespace {

json nodata_to_json(const std::optional<float>& nodata) {
  if (!nodata) return nullptr;
  if (std::isnan(*nodata)) return "NaN";
  return *nodata;
}

std::optional<float> nodata_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) {
    if (j.get<std::string>() == "NaN") return std::numeric_limits<float>::quiet_NaN();
    throw Error("unsupported nodata value " + j.dump());
  }
  return j.get<float>();
}

json read_header(const fs::path& payload, const std::string& dtype) {
  const json h = read_json_file(sidecar_path(payload));
  if (!h.contains("width") || !h.contains("height") || !h.contains("dtype")) {
    throw Error("raster header " + sidecar_path(payload).string() + " lacks width/height/dtype");
  }
  if (h.at("dtype").get<std::string>() != dtype) {
    throw Error("raster " + payload.string() + " has dtype " + h.at("dtype").get<std::string>() +
                ", expected " + dtype);
  }
  return h;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

}  // namespace

fs::path sidecar_path(const fs::path& payload) { return fs::path(payload.string() + ".json"); }

std::vector<std::uint8_t> encode_f32le(std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  return out;
}

std::vector<float> decode_f32le(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) throw Error("f32le payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[4 * i + k]) << (8 * k);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_height_map(const fs::path& payload, const HeightMap& map) {
  json h;
  h["width"] = map.width();
  h["height"] = map.height();
  h["dtype"] = "f32le";
  h["nodata"] = nodata_to_json(map.nodata());
  write_bytes(payload, encode_f32le(map.values()));
  write_json_file(sidecar_path(payload), h);
}

HeightMap read_height_map(const fs::path& payload) {
  const json h = read_header(payload, "f32le");
  const int w = h.at("width").get<int>();
  const int ht = h.at("height").get<int>();
  auto values = decode_f32le(read_bytes(payload));
  if (values.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(ht)) {
    throw Error("payload size of " + payload.string() + " does not match its header");
  }
  return HeightMap(w, ht, std::move(values), nodata_from_json(h.value("nodata", json(nullptr))));
}

void write_hierarchy_map(const fs::path& payload, const HierarchyMap& map) {
  json h;
  h["width"] = map.width();
  h["height"] = map.height();
  h["dtype"] = "u8";
  h["n_classes"] = map.n_classes();
  write_bytes(payload, std::vector<std::uint8_t>(map.values().begin(), map.values().end()));
  write_json_file(sidecar_path(payload), h);
}

HierarchyMap read_hierarchy_map(const fs::path& payload) {
  const json h = read_header(payload, "u8");
  const int w = h.at("width").get<int>();
  const int ht = h.at("height").get<int>();
  auto bytes = read_bytes(payload);
  return HierarchyMap(Grid<std::uint8_t>(w, ht, std::move(bytes)), h.at("n_classes").get<int>());
}

void write_image(const fs::path& payload, const Image& image) {
  json h;
  h["width"] = image.width;
  h["height"] = image.height;
  h["channels"] = image.channels;
  h["dtype"] = "f32le";
  h["layout"] = "planar";
  write_bytes(payload, encode_f32le(image.data));
  write_json_file(sidecar_path(payload), h);
}

Image read_image(const fs::path& payload) {
  const json h = read_header(payload, "f32le");
  Image img(h.value("channels", 1), h.at("width").get<int>(), h.at("height").get<int>());
  auto values = decode_f32le(read_bytes(payload));
  if (values.size() != img.data.size()) {
    throw Error("payload size of " + payload.string() + " does not match its header");
  }
  img.data = std::move(values);
  return img;
}

json rle_to_json(const RleRecord& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

RleRecord rle_from_json(const json& j) {
  RleRecord r;
  const auto& size = j.at("size");
  if (!size.is_array() || size.size() != 2) throw Error("mask_rle.size must be [h, w]");
  r.height = size[0].get<int>();
  r.width = size[1].get<int>();
  r.counts = j.at("counts").get<std::vector<std::uint32_t>>();
  return r;
}

json instance_to_json(const Instance& inst) {
  json j;
  j["bbox"] = {inst.box.x_min, inst.box.y_min, inst.box.x_max, inst.box.y_max};
  j["score"] = inst.box.score;
  if (const auto* b = std::get_if<BinaryMask>(&inst.mask)) {
    j["mask_rle"] = rle_to_json(rle_encode(*b));
  } else {
    const auto& p = std::get<ProbabilityMask>(inst.mask);
    j["mask_prob"] = {{"size", {p.height(), p.width()}},
                      {"data", std::vector<float>(p.values().begin(), p.values().end())}};
  }
  return j;
}

Instance instance_from_json(const json& j, int width, int height) {
  Instance inst;
  const auto& b = j.at("bbox");
  if (!b.is_array() || b.size() != 4) throw Error("bbox must be [x0, y0, x1, y1]");
  inst.box = BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>(),
                  j.at("score").get<double>()};
  if (j.contains("mask_rle")) {
    inst.mask = rle_decode(rle_from_json(j.at("mask_rle")));
  } else if (j.contains("mask_prob")) {
    const auto& mp = j.at("mask_prob");
    const int h = mp.at("size")[0].get<int>();
    const int w = mp.at("size")[1].get<int>();
    inst.mask = ProbabilityMask(w, h, mp.at("data").get<std::vector<float>>());
  } else {
    inst.mask = BinaryMask(width, height);
  }
  return inst;
}

json instance_set_to_json(const InstanceSet& set) {
  json j;
  j["tile_id"] = set.tile_id;
  j["model_id"] = set.model_id;
  j["model_weight"] = set.model_weight;
  j["size"] = {set.height, set.width};
  j["instances"] = json::array();
  for (const auto& inst : set.instances) j["instances"].push_back(instance_to_json(inst));
  return j;
}

InstanceSet instance_set_from_json(const json& j) {
  InstanceSet set;
  set.tile_id = j.at("tile_id").get<std::string>();
  set.model_id = j.value("model_id", std::string{});
  set.model_weight = j.value("model_weight", 1.0);
  if (j.contains("size")) {
    set.height = j.at("size")[0].get<int>();
    set.width = j.at("size")[1].get<int>();
  }
  for (const auto& ij : j.at("instances")) {
    if (!j.contains("size")) {
      const json* sz = ij.contains("mask_rle") ? &ij.at("mask_rle").at("size")
                                               : ij.contains("mask_prob") ? &ij.at("mask_prob").at("size") : nullptr;
      if (sz) {
        set.height = (*sz)[0].get<int>();
        set.width = (*sz)[1].get<int>();
      }
    }
    set.instances.push_back(instance_from_json(ij, set.width, set.height));
  }
  set.validate();
  return set;
}

void write_instance_set(const fs::path& path, const InstanceSet& set) {
  write_json_file(path, instance_set_to_json(set));
}

InstanceSet read_instance_set(const fs::path& path) {
  try {
    return instance_set_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw Error("malformed instance set " + path.string() + ": " + e.what());
  }
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return fnv1a_hex(bytes);
}

std::string hash_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) return hash_file(dir);
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::vector<std::uint8_t> acc;
  for (const auto& rel : files) {
    const std::string name = rel.generic_string();
    acc.insert(acc.end(), name.begin(), name.end());
    acc.push_back(0);
    const std::string h = hash_file(dir / rel);
    acc.insert(acc.end(), h.begin(), h.end());
  }
  return fnv1a_hex(acc);
}

}  // namespace hgd
