// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "hgd/postproc.hpp"
#include "hgd/preproc.hpp"
#include "hgd/rng.hpp"

namespace hgd {

namespace {

// One quarter turn: output row y, column x reads input row x, column w-1-y.
template <class T>
std::vector<T> rotate_plane(std::span<const T> src, int w, int h) {
  std::vector<T> out(src.size());
  const int nw = h;
  for (int y = 0; y < w; ++y) {
    for (int x = 0; x < nw; ++x) {
      out[static_cast<std::size_t>(y) * nw + x] = src[static_cast<std::size_t>(x) * w + (w - 1 - y)];
    }
  }
  return out;
}

TrainExample rotate_example(const TrainExample& ex) {
  const int w = ex.image.width, h = ex.image.height;
  Image img(ex.image.channels, h, w);
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (int c = 0; c < ex.image.channels; ++c) {
    const auto rot = rotate_plane<float>(std::span<const float>(ex.image.data).subspan(c * plane, plane), w, h);
    std::copy(rot.begin(), rot.end(), img.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
  auto labels = rotate_plane<std::uint8_t>(ex.labels.values(), w, h);
  auto target = rotate_plane<float>(ex.target.values(), w, h);
  return {std::move(img), HierarchyMap(Grid<std::uint8_t>(h, w, std::move(labels)), ex.labels.n_classes()),
          NormalizedHeightMap(Grid<float>(h, w, std::move(target)), ex.target.norm_constant(), ex.target.nodata())};
}

TrainExample rescale_example(const TrainExample& ex, double scale) {
  const int nw = scaled_even_size(ex.image.width, scale);
  const int nh = scaled_even_size(ex.image.height, scale);
  if (nw == ex.image.width && nh == ex.image.height) return ex;
  Image img = resize_bilinear(ex.image, nw, nh);
  auto labels = resize_plane_nearest<std::uint8_t>(ex.labels.values(), ex.labels.width(), ex.labels.height(), nw, nh);
  auto target = resize_plane_nearest<float>(ex.target.values(), ex.target.width(), ex.target.height(), nw, nh);
  return {std::move(img), HierarchyMap(Grid<std::uint8_t>(nw, nh, std::move(labels)), ex.labels.n_classes()),
          NormalizedHeightMap(Grid<float>(nw, nh, std::move(target)), ex.target.norm_constant(), ex.target.nodata())};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be >= 0");
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) throw Error("scale jitter range must satisfy 0 < min <= max");
  if (!(poly_power >= 0.0)) throw Error("polynomial decay power must be >= 0");
  loss.validate();
}

double poly_learning_rate(double base, int t, int total, double power) {
  const double progress = static_cast<double>(t) / static_cast<double>(total);
  return base * std::pow(std::max(0.0, 1.0 - progress), power);
}

int scaled_even_size(int size, double scale) {
  const int half = static_cast<int>(std::lround(size * scale / 2.0));
  return std::max(2, 2 * half);
}

TrainResult train(ToyDualDecoder<float> model, std::span<const TrainExample> dataset, const TrainConfig& config) {
  if (dataset.empty()) throw Error("train: dataset is empty");
  config.validate();
  for (const auto& ex : dataset) {
    if (ex.labels.n_classes() != model.n_classes()) throw Error("train: label classes differ from the model");
  }
  Rng rng(config.seed, 0x747261696e);
  TrainResult result{std::move(model), {}};
  auto& net = result.model;
  result.loss_trace.reserve(static_cast<std::size_t>(config.iterations));
  const bool jitter = config.scale_max > config.scale_min || config.scale_min != 1.0;

  std::vector<float> grad_sum(net.params().size());
  for (int t = 0; t < config.iterations; ++t) {
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0f);
    double loss_sum = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(dataset.size()) - 1));
      TrainExample ex = dataset[idx];
      if (jitter) ex = rescale_example(ex, rng.uniform(config.scale_min, config.scale_max));
      if (config.rotate) {
        const int turns = rng.uniform_int(0, 3);
        for (int k = 0; k < turns; ++k) ex = rotate_example(ex);
      }
      const auto sample = make_sample<float>(ex.image, ex.labels, ex.target);
      LossBreakdown<float> loss;
      const auto g = backward(net, sample, config.loss, &loss);
      if (!std::isfinite(loss.total)) throw Error("train: loss became non-finite at iteration " + std::to_string(t));
      loss_sum += loss.total;
      for (std::size_t i = 0; i < g.size(); ++i) grad_sum[i] += g[i];
    }
    result.loss_trace.push_back(loss_sum / config.batch_size);
    const auto lr = static_cast<float>(
        poly_learning_rate(config.learning_rate, t, config.iterations, config.poly_power) / config.batch_size);
    auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad_sum[i];
  }
  return result;
}

MultiScaleOutput infer_multiscale(const ToyDualDecoder<float>& model, const Image& image, double norm_constant,
                                  std::span<const double> scales) {
  if (scales.empty()) throw Error("infer_multiscale: no scales");
  MultiScaleOutput out;
  const int n = model.n_classes();
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  std::vector<double> prob_sum(static_cast<std::size_t>(n) * plane, 0.0);
  for (double s : scales) {
    if (!(s > 0.0)) throw Error("infer_multiscale: scales must be > 0");
    const int w = scaled_even_size(image.width, s);
    const int h = scaled_even_size(image.height, s);
    const Image scaled = (w == image.width && h == image.height) ? image : resize_bilinear(image, w, h);
    const auto pred = forward(model, scaled, norm_constant);
    out.heights.push_back(denormalize_heights(pred.height));
    out.scales.push_back(s);
    const auto probs = pred.seg.probabilities();
    const std::size_t sp = static_cast<std::size_t>(w) * h;
    for (int c = 0; c < n; ++c) {
      const auto native = resize_plane_bilinear(std::span<const float>(probs).subspan(c * sp, sp), w, h,
                                                image.width, image.height);
      for (std::size_t p = 0; p < plane; ++p) prob_sum[c * plane + p] += native[p];
    }
  }
  Grid<std::uint8_t> seg(image.width, image.height);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int c = 1; c < n; ++c) {
      if (prob_sum[c * plane + p] > prob_sum[best * plane + p]) best = c;
    }
    seg[p] = static_cast<std::uint8_t>(best);
  }
  out.seg = HierarchyMap(std::move(seg), n);
  return out;
}

}  // namespace hgd
