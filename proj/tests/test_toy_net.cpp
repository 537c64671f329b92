// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "hgd/raster_io.hpp"
#include "hgd/rng.hpp"
#include "hgd/synth.hpp"
#include "hgd/toy_net.hpp"
#include "hgd/trainer.hpp"
#include "hgd/preproc.hpp"
#include "test_util.hpp"

using namespace hgd;

namespace {

// Direct nested-loop network evaluation used as the forward oracle.
using Vol = std::vector<std::vector<std::vector<double>>>;  // [c][y][x]

Vol naive_conv(const Vol& in, std::span<const double> p, std::size_t off, int cin, int cout, int k, int stride) {
  const int h = static_cast<int>(in[0].size()), w = static_cast<int>(in[0][0].size());
  const int pad = k / 2;
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  const std::size_t nw = static_cast<std::size_t>(cout) * cin * k * k;
  Vol out(cout, std::vector<std::vector<double>>(ho, std::vector<double>(wo)));
  for (int o = 0; o < cout; ++o) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        double acc = p[off + nw + o];
        for (int i = 0; i < cin; ++i) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = y * stride + ky - pad, ix = x * stride + kx - pad;
              if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
              acc += p[off + ((static_cast<std::size_t>(o) * cin + i) * k + ky) * k + kx] * in[i][iy][ix];
            }
          }
        }
        out[o][y][x] = acc;
      }
    }
  }
  return out;
}

Vol relu(Vol v) {
  for (auto& c : v) for (auto& r : c) for (auto& x : r) x = std::max(0.0, x);
  return v;
}

Vol up2(const Vol& v) {
  Vol out(v.size(), std::vector<std::vector<double>>(v[0].size() * 2, std::vector<double>(v[0][0].size() * 2)));
  for (std::size_t c = 0; c < v.size(); ++c)
    for (std::size_t y = 0; y < out[c].size(); ++y)
      for (std::size_t x = 0; x < out[c][y].size(); ++x) out[c][y][x] = v[c][y / 2][x / 2];
  return out;
}

Tensor<double> random_tensor(Rng& rng, int c, int h, int w) {
  Tensor<double> t(c, h, w);
  for (auto& v : t.data) v = rng.uniform();
  return t;
}

Sample<double> random_sample(Rng& rng, int size, int n_classes) {
  Sample<double> s;
  s.image = random_tensor(rng, 3, size, size);
  Grid<std::uint8_t> labels(size, size);
  for (auto& v : labels.values()) v = static_cast<std::uint8_t>(rng.uniform_int(0, n_classes - 1));
  s.labels = HierarchyMap(std::move(labels), n_classes);
  s.height_target.resize(static_cast<std::size_t>(size) * size);
  for (auto& v : s.height_target) v = rng.uniform();
  return s;
}

}  // namespace

TEST_CASE("smooth L1 examples") {
  const std::vector<double> p{0.5}, t{0.0}, p2{2.0};
  CHECK(smooth_l1<double>(p, p) == 0.0);
  CHECK(smooth_l1<double>(p, t) == doctest::Approx(0.125));
  CHECK(smooth_l1<double>(p2, t) == doctest::Approx(1.5));
  const std::vector<double> pm{0.5, 2.0}, tm{0.0, 0.0};
  const std::vector<std::uint8_t> valid{1, 0};
  CHECK(smooth_l1<double>(pm, tm, valid) == doctest::Approx(0.125));
}

TEST_CASE("cross entropy examples") {
  Tensor<double> zero(4, 1, 1);
  const HierarchyMap l0(Grid<std::uint8_t>(1, 1, std::uint8_t{0}), 4);
  CHECK(cross_entropy(zero, l0) == doctest::Approx(std::log(4.0)));
  Tensor<double> two(2, 1, 1);
  two.data = {1.0, 0.0};
  const HierarchyMap l2(Grid<std::uint8_t>(1, 1, std::uint8_t{0}), 2);
  CHECK(cross_entropy(two, l2) == doctest::Approx(std::log(1.0 + std::exp(-1.0))));
  CHECK(cross_entropy(two, l2) == doctest::Approx(0.3133).epsilon(1e-3));
  two.data = {60.0, 0.0};
  CHECK(cross_entropy(two, l2) < 1e-20);
  two.data = {1000.0, 0.0};
  CHECK(std::isfinite(cross_entropy(two, l2)));
}

TEST_CASE("weighted total loss") {
  CHECK(total_loss(1.3863, 0.125, LossWeights{5, 30}) == doctest::Approx(10.6815));
  CHECK(total_loss(0.0, 0.0, LossWeights{}) == 0.0);
  CHECK_THROWS_AS(LossWeights({-1, 30}).validate(), Error);
  CHECK_THROWS_AS(LossWeights({0, 0}).validate(), Error);
}

TEST_CASE("zero network outputs") {
  const ToyDualDecoder<float> model(4);
  const Image img(3, 6, 4, 0.0f);
  const auto pred = forward(model, img, std::log(188.0));
  CHECK(pred.height.width() == 6);
  CHECK(pred.height.height() == 4);
  for (float v : pred.height.values()) CHECK(v == 0.5f);
  const auto probs = pred.seg.probabilities();
  for (float v : probs) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("forward matches the nested-loop oracle") {
  Rng rng(23);
  auto model = ToyDualDecoder<double>::initialized(3, 23);
  for (auto& p : model.params()) p += rng.uniform(-0.05, 0.05);
  const auto input = random_tensor(rng, 3, 6, 8);
  const auto cache = forward_cache(model, input);

  Vol x(3, std::vector<std::vector<double>>(6, std::vector<double>(8)));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 8; ++xx) x[c][y][xx] = input.at(c, y, xx);
  const auto p = model.params();
  const auto e1 = relu(naive_conv(x, p, model.offset(kE1), 3, 8, 3, 1));
  const auto e2 = relu(naive_conv(e1, p, model.offset(kE2), 8, 8, 3, 2));
  const auto h = naive_conv(up2(relu(naive_conv(e2, p, model.offset(kH1), 8, 8, 3, 1))), p, model.offset(kH2), 8, 1, 1, 1);
  const auto s = naive_conv(up2(relu(naive_conv(e2, p, model.offset(kS1), 8, 8, 3, 1))), p, model.offset(kS2), 8, 3, 1, 1);

  REQUIRE(cache.hgt_out.height == 6);
  REQUIRE(cache.hgt_out.width == 8);
  for (int y = 0; y < 6; ++y) {
    for (int xx = 0; xx < 8; ++xx) {
      CHECK(cache.hgt_out.at(0, y, xx) == doctest::Approx(1.0 / (1.0 + std::exp(-h[0][y][xx]))).epsilon(1e-12));
      for (int c = 0; c < 3; ++c) CHECK(cache.logits.at(c, y, xx) == doctest::Approx(s[c][y][xx]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward rejects odd sizes and out-of-range pixels") {
  const auto model = ToyDualDecoder<float>::initialized(4, 1);
  CHECK_THROWS_AS(forward(model, Image(3, 5, 4), 1.0), Error);
  Image bad(3, 4, 4);
  bad.at(0, 0, 0) = 1.5f;
  CHECK_THROWS_AS(forward(model, bad, 1.0), Error);
}

TEST_CASE("forward is deterministic") {
  const auto model = ToyDualDecoder<float>::initialized(4, 42);
  Rng rng(42);
  Image img(3, 8, 8);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  const auto a = forward(model, img, 5.0);
  const auto b = forward(ToyDualDecoder<float>::initialized(4, 42), img, 5.0);
  CHECK(encode_f32le(a.height.values()) == encode_f32le(b.height.values()));
  CHECK(a.seg.data == b.seg.data);
}

TEST_CASE("dead branches get exactly zero gradient") {
  Rng rng(4);
  auto model = ToyDualDecoder<double>::initialized(4, 4);
  const auto s = random_sample(rng, 6, 4);

  const auto g_no_seg = backward(model, s, LossWeights{0.0, 30.0});
  for (Layer l : {kS1, kS2}) {
    const auto [lo, hi] = model.range(l);
    for (auto i = lo; i < hi; ++i) CHECK(g_no_seg[i] == 0.0);
  }
  const auto g_no_height = backward(model, s, LossWeights{5.0, 0.0});
  for (Layer l : {kH1, kH2}) {
    const auto [lo, hi] = model.range(l);
    for (auto i = lo; i < hi; ++i) CHECK(g_no_height[i] == 0.0);
  }
}

TEST_CASE("analytic gradient agrees with central differences") {
  const auto r = gradcheck(7, 6, LossWeights{5.0, 30.0});
  CHECK(r.checked == ToyDualDecoder<double>(4).params().size());
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("backward reports the loss it differentiates") {
  Rng rng(8);
  const auto model = ToyDualDecoder<double>::initialized(4, 8);
  const auto s = random_sample(rng, 4, 4);
  LossBreakdown<double> lb;
  backward(model, s, LossWeights{}, &lb);
  const auto ev = evaluate_loss(model, s, LossWeights{});
  CHECK(lb.total == doctest::Approx(ev.total));
  CHECK(ev.total == doctest::Approx(5.0 * ev.cross_entropy + 30.0 * ev.smooth_l1));
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  const auto model = ToyDualDecoder<float>::initialized(5, 99);
  save_checkpoint(dir / "m.bin", model, {{"norm_constant", 4.5}});
  nlohmann::json meta;
  const auto back = load_checkpoint(dir / "m.bin", &meta);
  CHECK(back.n_classes() == 5);
  CHECK(std::equal(back.params().begin(), back.params().end(), model.params().begin(), model.params().end()));
  CHECK(meta.at("norm_constant") == 4.5);
  CHECK(std::filesystem::file_size(dir / "m.bin") == model.params().size() * 4);
  write_bytes(dir / "m.bin", {1, 2, 3});
  CHECK_THROWS_AS(load_checkpoint(dir / "m.bin"), Error);
}

TEST_CASE("polynomial learning rate") {
  CHECK(poly_learning_rate(0.1, 0, 10, 1.0) == doctest::Approx(0.1));
  CHECK(poly_learning_rate(0.1, 5, 10, 1.0) == doctest::Approx(0.05));
  CHECK(poly_learning_rate(0.1, 5, 10, 2.0) == doctest::Approx(0.025));
  CHECK(scaled_even_size(32, 0.75) == 24);
  CHECK(scaled_even_size(3, 0.1) == 2);
}

namespace {

std::vector<TrainExample> small_dataset(int n) {
  SceneConfig scene;
  std::vector<HeightMap> ndsm;
  std::vector<SyntheticTile> tiles;
  for (int i = 0; i < n; ++i) {
    tiles.push_back(generate_tile(scene, i));
    ndsm.push_back(tiles.back().ndsm);
  }
  const double c = compute_norm_constant(ndsm);
  std::vector<TrainExample> out;
  for (auto& t : tiles) {
    out.push_back({t.image, synthesize_hierarchy_labels(t.ndsm, HierarchySpec::default_spec()),
                   normalize_heights(t.ndsm, c)});
  }
  return out;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto data = small_dataset(2);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.iterations = 1;
  const auto init = ToyDualDecoder<float>::initialized(4, 1);
  const auto r = train(init, data, cfg);
  CHECK(std::equal(r.model.params().begin(), r.model.params().end(), init.params().begin(), init.params().end()));
  CHECK(r.loss_trace.size() == 1);
}

TEST_CASE("training reduces loss and is deterministic") {
  const auto data = small_dataset(64);
  TrainConfig cfg;
  cfg.seed = 3;
  const auto a = train(ToyDualDecoder<float>::initialized(4, 3), data, cfg);
  REQUIRE(a.loss_trace.size() == 500);
  auto mean = [&](std::size_t lo, std::size_t hi) {
    double s = 0;
    for (auto i = lo; i < hi; ++i) s += a.loss_trace[i];
    return s / static_cast<double>(hi - lo);
  };
  CHECK(mean(475, 500) < 0.5 * mean(0, 25));
  const auto b = train(ToyDualDecoder<float>::initialized(4, 3), data, cfg);
  CHECK(a.loss_trace == b.loss_trace);
}

TEST_CASE("multi-scale inference shapes") {
  const auto data = small_dataset(1);
  const auto model = ToyDualDecoder<float>::initialized(4, 2);
  const std::vector<double> scales{0.5, 1.0, 1.5};
  const auto out = infer_multiscale(model, data[0].image, 5.0, scales);
  REQUIRE(out.heights.size() == 3);
  CHECK(out.heights[0].width() == 16);
  CHECK(out.heights[2].width() == 48);
  CHECK(out.seg.width() == 32);
  CHECK(out.seg.n_classes() == 4);
}
