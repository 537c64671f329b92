// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hgd/raster.hpp"
#include "json.hpp"

namespace hgd {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Rasters are stored as a raw little-endian payload (`name.f32`, `name.u8`)
// next to a JSON sidecar at `<payload path>.json`.

fs::path sidecar_path(const fs::path& payload);

void write_height_map(const fs::path& payload, const HeightMap& map);
HeightMap read_height_map(const fs::path& payload);

void write_hierarchy_map(const fs::path& payload, const HierarchyMap& map);
HierarchyMap read_hierarchy_map(const fs::path& payload);

void write_image(const fs::path& payload, const Image& image);
Image read_image(const fs::path& payload);

json rle_to_json(const RleRecord& rle);
RleRecord rle_from_json(const json& j);

json instance_to_json(const Instance& inst);
Instance instance_from_json(const json& j, int width, int height);

json instance_set_to_json(const InstanceSet& set);
InstanceSet instance_set_from_json(const json& j);
void write_instance_set(const fs::path& path, const InstanceSet& set);
InstanceSet read_instance_set(const fs::path& path);

json read_json_file(const fs::path& path);
/// Writes `j.dump(2)` plus a trailing newline.
void write_json_file(const fs::path& path, const json& j);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_f32le(std::span<const float> values);
std::vector<float> decode_f32le(const std::vector<std::uint8_t>& bytes);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);
std::string hash_file(const fs::path& path);
/// Hash over every regular file below `dir`, visiting relative paths in sorted order.
std::string hash_tree(const fs::path& dir);

}  // namespace hgd
