// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hgd/raster.hpp"
#include "hgd/toy_net.hpp"

namespace hgd {

struct TrainExample {
  Image image;
  HierarchyMap labels;
  NormalizedHeightMap target;
};

/// Plain SGD with lr * (1 - t/T)^power decay and optional random scale / 90-degree rotation.
struct TrainConfig {
  double learning_rate = 0.05;
  int iterations = 500;
  int batch_size = 4;
  std::uint64_t seed = 3;
  double scale_min = 1.0;
  double scale_max = 1.0;
  bool rotate = true;
  double poly_power = 1.0;
  LossWeights loss;

  void validate() const;
};

struct TrainResult {
  ToyDualDecoder<float> model;
  std::vector<double> loss_trace;  // batch-mean total loss per iteration, before the update
};

TrainResult train(ToyDualDecoder<float> model, std::span<const TrainExample> dataset, const TrainConfig& config);

/// Learning rate used at iteration t (0-based) of T.
double poly_learning_rate(double base, int t, int total, double power);

/// Even dimension nearest to `size * scale`, at least 2.
int scaled_even_size(int size, double scale);

struct MultiScaleOutput {
  std::vector<HeightMap> heights;  // meters, one per scale at that scale's resolution
  std::vector<double> scales;
  HierarchyMap seg;                // native resolution, argmax of scale-averaged probabilities
};

MultiScaleOutput infer_multiscale(const ToyDualDecoder<float>& model, const Image& image, double norm_constant,
                                  std::span<const double> scales);

}  // namespace hgd
