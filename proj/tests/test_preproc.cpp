// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hgd/preproc.hpp"
#include "hgd/rng.hpp"

using namespace hgd;

namespace {

HeightMap constant_map(float v, int w = 2, int h = 2) { return HeightMap(Grid<float>(w, h, v)); }

}  // namespace

TEST_CASE("normalize examples") {
  const double c = std::log(188.0);
  const HeightMap h(4, 1, {0.0f, 10.0f, 186.9999f, 400.0f});
  const auto n = normalize_heights(h, c);
  CHECK(n[0] == 0.0f);
  CHECK(n[1] == doctest::Approx(std::log(11.0) / std::log(188.0)).epsilon(1e-6));
  CHECK(n[1] == doctest::Approx(0.4580).epsilon(1e-3));
  CHECK(n[2] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(n[3] == 1.0f);  // clamped
  CHECK(n.norm_constant() == c);
  CHECK_THROWS_AS(normalize_heights(h, 0.0), Error);
}

TEST_CASE("denormalize examples") {
  const double c = std::log(188.0);
  const NormalizedHeightMap n(Grid<float>(2, 1, std::vector<float>{0.0f, 1.0f}), c);
  const auto h = denormalize_heights(n);
  CHECK(h[0] == 0.0f);
  CHECK(h[1] == doctest::Approx(187.0).epsilon(1e-5));
  const auto rt = denormalize_heights(normalize_heights(HeightMap(1, 1, {37.2f}), c));
  CHECK(std::abs(rt[0] - 37.2) < 1e-4);
}

TEST_CASE("nodata passes through normalization") {
  const HeightMap h(2, 1, {-1.0f, 5.0f}, -1.0f);
  const auto n = normalize_heights(h, 2.0);
  CHECK(n.is_nodata(0));
  CHECK(n[1] == doctest::Approx(std::log(6.0) / 2.0));
  const auto back = denormalize_heights(n);
  CHECK(back.is_nodata(0));
}

TEST_CASE("norm constant") {
  const std::vector<HeightMap> one{HeightMap(2, 1, {0.0f, 187.0f})};
  CHECK(compute_norm_constant(one) == doctest::Approx(5.2364).epsilon(1e-4));
  const std::vector<HeightMap> e{constant_map(static_cast<float>(std::numbers::e - 1.0))};
  CHECK(compute_norm_constant(e) == doctest::Approx(1.0).epsilon(1e-6));
  const std::vector<HeightMap> zeros{constant_map(0.0f), constant_map(0.0f)};
  CHECK_THROWS_AS(compute_norm_constant(zeros), Error);
  // Dataset-wide: the maximum over all tiles.
  const std::vector<HeightMap> two{constant_map(3.0f), constant_map(20.0f)};
  CHECK(compute_norm_constant(two) == doctest::Approx(std::log(21.0)));
}

TEST_CASE("default hierarchy bins") {
  const auto spec = HierarchySpec::default_spec();
  CHECK(spec.n_classes() == 4);
  CHECK(spec.classify(0.0) == 0);
  CHECK(spec.classify(5.0) == 1);
  CHECK(spec.classify(20.0) == 2);
  CHECK(spec.classify(50.0) == 3);
  CHECK(spec.classify(9.999999) == 1);
  CHECK(spec.classify(10.0) == 2);
  CHECK(spec.classify(1e-6) == 1);
  CHECK(spec.classify(500.0) == 3);
}

TEST_CASE("hierarchy spec validation") {
  CHECK_THROWS_AS(HierarchySpec({0.0, 5.0, 5.0}), Error);
  CHECK_THROWS_AS(HierarchySpec({0.0}), Error);
  CHECK_THROWS_AS(HierarchySpec({1.0, 5.0}), Error);
  CHECK_THROWS_AS(HierarchySpec({0.0, 1.0, 2.0}, {"a"}), Error);
  const auto round = HierarchySpec::from_json(HierarchySpec::default_spec().to_json());
  CHECK(round.boundaries() == HierarchySpec::default_spec().boundaries());
}

TEST_CASE("label synthesis follows the bins") {
  const HeightMap h(5, 1, {0.0f, 5.0f, 20.0f, 50.0f, -1.0f}, -1.0f);
  const auto labels = synthesize_hierarchy_labels(h, HierarchySpec::default_spec());
  CHECK(labels.n_classes() == 4);
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 1);
  CHECK(labels[2] == 2);
  CHECK(labels[3] == 3);
  CHECK(labels[4] == 0);  // nodata
}

TEST_CASE("clustered bins") {
  std::vector<float> v;
  for (float x : {0.0f, 5.0f, 20.0f, 50.0f}) v.insert(v.end(), 10, x);
  const std::vector<HeightMap> tiles{HeightMap(static_cast<int>(v.size()), 1, v)};
  const auto spec = cluster_hierarchy_spec(tiles, 4);
  // Centers 5, 20, 50: midpoints 12.5 and 35, top edge max + 1.
  REQUIRE(spec.boundaries().size() == 5);
  CHECK(spec.boundaries()[0] == 0.0);
  CHECK(spec.boundaries()[1] == doctest::Approx(1e-6));
  CHECK(spec.boundaries()[2] == doctest::Approx(12.5));
  CHECK(spec.boundaries()[3] == doctest::Approx(35.0));
  CHECK(spec.boundaries()[4] == doctest::Approx(51.0));

  const auto two = cluster_hierarchy_spec(tiles, 2);
  CHECK(two.boundaries() == std::vector<double>{0.0, 1e-6, 51.0});

  const std::vector<HeightMap> flat{constant_map(7.0f, 4, 4)};
  CHECK_THROWS_AS(cluster_hierarchy_spec(flat, 3), Error);
}

TEST_CASE("normalization round trip over [0, 400] m") {
  Rng rng(17);
  std::vector<float> v(4000);
  for (auto& x : v) x = static_cast<float>(rng.uniform(0.0, 400.0));
  v[0] = 400.0f;
  v[1] = 0.0f;
  const HeightMap h(static_cast<int>(v.size()), 1, v);
  const std::vector<HeightMap> tiles{h};
  const auto back = denormalize_heights(normalize_heights(h, compute_norm_constant(tiles)));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0f) {
      CHECK(back[i] == 0.0f);
    } else {
      CHECK(std::abs(back[i] - v[i]) / v[i] < 1e-5);
    }
  }
}
