// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "hgd/raster.hpp"
#include "hgd/raster_io.hpp"
#include "hgd/rng.hpp"
#include "test_util.hpp"

using namespace hgd;

TEST_CASE("box IoU") {
  CHECK(iou_box({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(iou_box({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  // intersection 50, union 150
  CHECK(iou_box({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0));
  CHECK(iou_box({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
}

TEST_CASE("mask IoU") {
  BinaryMask a(4, 2), b(4, 2);
  a(0, 0) = a(1, 0) = a(2, 0) = a(3, 0) = 1;
  b(2, 0) = b(3, 0) = b(0, 1) = b(1, 1) = 1;
  CHECK(iou_mask(a, a) == doctest::Approx(1.0));
  CHECK(iou_mask(a, b) == doctest::Approx(2.0 / 6.0));
  BinaryMask c(4, 2);
  c(0, 1) = 1;
  CHECK(iou_mask(a, c) == 0.0);
  CHECK(iou_mask(BinaryMask(4, 2), BinaryMask(4, 2)) == 0.0);
  CHECK_THROWS_AS(iou_mask(a, BinaryMask(2, 4)), Error);
}

TEST_CASE("RLE examples") {
  CHECK(rle_encode(BinaryMask(3, 3)).counts == std::vector<std::uint32_t>{9});
  CHECK(rle_encode(BinaryMask(3, 3, std::uint8_t{1})).counts == std::vector<std::uint32_t>{0, 9});
  // Column-major bits 0,1,1,0: (0,0)=0 (0,1)=1 (1,0)=1 (1,1)=0.
  BinaryMask m(2, 2);
  m(0, 1) = 1;
  m(1, 0) = 1;
  const auto r = rle_encode(m);
  CHECK(r.counts == std::vector<std::uint32_t>{1, 2, 1});
  CHECK(r.height == 2);
  CHECK(r.width == 2);
  CHECK(rle_decode(r) == m);
}

TEST_CASE("RLE decode rejects inconsistent counts") {
  CHECK_THROWS_AS(rle_decode({2, 2, {1, 2}}), Error);
  CHECK_THROWS_AS(rle_decode({2, 2, {3, 2}}), Error);
}

TEST_CASE("RLE round trip on random masks") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int w = rng.uniform_int(1, 9), h = rng.uniform_int(1, 9);
    const double density = rng.uniform();
    BinaryMask m(w, h);
    for (auto& v : m.values()) v = rng.uniform() < density;
    const auto r = rle_encode(m);
    std::uint64_t total = 0;
    for (auto c : r.counts) total += c;
    CHECK(total == static_cast<std::uint64_t>(w) * h);
    CHECK(rle_decode(r) == m);
  }
}

TEST_CASE("height map validation") {
  CHECK_THROWS_AS(HeightMap(1, 1, {-1.0f}), Error);
  CHECK_THROWS_AS(HeightMap(1, 1, {std::numeric_limits<float>::infinity()}), Error);
  CHECK_NOTHROW(HeightMap(2, 1, {-9999.0f, 1.0f}, -9999.0f));
  const HeightMap nan_nodata(2, 1, {std::nanf(""), 2.0f}, std::nanf(""));
  CHECK(nan_nodata.is_nodata(0));
  CHECK_FALSE(nan_nodata.is_nodata(1));
  CHECK_THROWS_AS(HierarchyMap(Grid<std::uint8_t>(1, 1, std::uint8_t{4}), 4), Error);
}

TEST_CASE("mask bounds") {
  BinaryMask m(5, 5);
  CHECK_FALSE(mask_bounds(m).has_value());
  m(1, 2) = 1;
  m(3, 4) = 1;
  const auto b = mask_bounds(m);
  REQUIRE(b);
  CHECK(b->x_min == 1);
  CHECK(b->y_min == 2);
  CHECK(b->x_max == 4);
  CHECK(b->y_max == 5);
}

TEST_CASE("raster write/read is byte-stable") {
  TempDir dir;
  Rng rng(9);
  std::vector<float> v(7 * 5);
  for (auto& x : v) x = static_cast<float>(rng.uniform(0, 300));
  v[3] = -1.0f;
  const HeightMap map(7, 5, v, -1.0f);
  write_height_map(dir / "a.f32", map);
  const auto back = read_height_map(dir / "a.f32");
  CHECK(back == map);
  write_height_map(dir / "b.f32", back);
  CHECK(read_bytes(dir / "a.f32") == read_bytes(dir / "b.f32"));
  CHECK(read_bytes(dir / "a.f32.json") == read_bytes(dir / "b.f32.json"));
  CHECK(read_bytes(dir / "a.f32").size() == 7 * 5 * 4);
}

TEST_CASE("f32le encoding is little-endian IEEE") {
  const auto bytes = encode_f32le(std::vector<float>{1.0f});
  CHECK(bytes == std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3f});
}

TEST_CASE("instance set JSON round trip") {
  InstanceSet s;
  s.tile_id = "tile_0001";
  s.model_id = "m";
  s.model_weight = 2.0;
  s.width = 4;
  s.height = 3;
  BinaryMask m(4, 3);
  m(1, 1) = m(2, 1) = 1;
  s.instances.push_back({BBox{1, 1, 3, 2, 0.9}, m});
  ProbabilityMask p(4, 3, 0.25f);
  s.instances.push_back({BBox{0, 0, 4, 3, 0.4}, p});
  const auto back = instance_set_from_json(instance_set_to_json(s));
  CHECK(back.tile_id == s.tile_id);
  CHECK(back.model_weight == 2.0);
  REQUIRE(back.instances.size() == 2);
  CHECK(std::get<BinaryMask>(back.instances[0].mask) == m);
  CHECK(back.instances[0].box == s.instances[0].box);
  CHECK(std::get<ProbabilityMask>(back.instances[1].mask) == p);
}

TEST_CASE("instance set validation") {
  InstanceSet s;
  s.width = 4;
  s.height = 4;
  s.instances.push_back({BBox{3, 0, 1, 2, 0.5}, BinaryMask(4, 4)});
  CHECK_THROWS_AS(s.validate(), Error);
  s.instances[0].box = {0, 0, 1, 1, 1.5};
  CHECK_THROWS_AS(s.validate(), Error);
  s.instances[0].box = {0, 0, 1, 1, 0.5};
  s.instances[0].mask = BinaryMask(3, 4);
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("tree hash ignores nothing and is order independent") {
  TempDir a, b;
  write_bytes(a / "x.bin", {1, 2});
  write_bytes(a / "sub" / "y.bin", {3});
  write_bytes(b / "sub" / "y.bin", {3});
  write_bytes(b / "x.bin", {1, 2});
  CHECK(hash_tree(a.path()) == hash_tree(b.path()));
  write_bytes(b / "x.bin", {1, 3});
  CHECK(hash_tree(a.path()) != hash_tree(b.path()));
}
