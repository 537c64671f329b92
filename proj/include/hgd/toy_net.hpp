// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hgd/raster.hpp"
#include "json.hpp"

namespace hgd {

/// Channel-major activation volume.
template <class T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w), T{}) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  T& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  const T& at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
};

struct ConvShape {
  const char* name;
  int in_channels;
  int out_channels;
  int kernel;
  int stride;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
  std::size_t param_count() const { return weight_count() + static_cast<std::size_t>(out_channels); }
};

enum Layer : int { kE1 = 0, kE2, kH1, kH2, kS1, kS2, kLayerCount };

inline constexpr int kImageChannels = 3;
inline constexpr int kFeatureChannels = 8;

/// Weights on the cross-entropy (alpha) and smooth-L1 (beta) terms.
struct LossWeights {
  double alpha = 5.0;
  double beta = 30.0;

  void validate() const;
};

/// Shared encoder (E1, stride-2 E2) feeding a sigmoid height head (H1, up2, H2)
/// and a softmax hierarchy head (S1, up2, S2). All parameters live in one flat
/// vector, layer by layer, weights [out][in][ky][kx] followed by biases.
template <class T>
class ToyDualDecoder {
 public:
  explicit ToyDualDecoder(int n_classes);

  /// Uniform in +-sqrt(1/fan_in), zero biases.
  static ToyDualDecoder initialized(int n_classes, std::uint64_t seed);

  int n_classes() const { return n_classes_; }
  std::uint64_t seed() const { return seed_; }
  const std::array<ConvShape, kLayerCount>& layers() const { return layers_; }
  std::size_t offset(Layer l) const { return offsets_[l]; }

  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }
  std::span<T> weights(Layer l) { return std::span<T>(params_).subspan(offsets_[l], layers_[l].weight_count()); }
  std::span<const T> weights(Layer l) const {
    return std::span<const T>(params_).subspan(offsets_[l], layers_[l].weight_count());
  }
  std::span<T> bias(Layer l) {
    return std::span<T>(params_).subspan(offsets_[l] + layers_[l].weight_count(), layers_[l].out_channels);
  }
  std::span<const T> bias(Layer l) const {
    return std::span<const T>(params_).subspan(offsets_[l] + layers_[l].weight_count(), layers_[l].out_channels);
  }
  /// Half-open parameter range of layer l.
  std::pair<std::size_t, std::size_t> range(Layer l) const {
    return {offsets_[l], offsets_[l] + layers_[l].param_count()};
  }

  template <class U>
  ToyDualDecoder<U> cast() const {
    ToyDualDecoder<U> out(n_classes_);
    out.set_seed(seed_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = static_cast<U>(params_[i]);
    return out;
  }
  void set_seed(std::uint64_t s) { seed_ = s; }

 private:
  int n_classes_;
  std::uint64_t seed_ = 0;
  std::array<ConvShape, kLayerCount> layers_;
  std::array<std::size_t, kLayerCount> offsets_{};
  std::vector<T> params_;
};

/// Every intermediate activation kept for the backward pass.
template <class T>
struct ForwardCache {
  Tensor<T> input;
  Tensor<T> enc1;     // relu(E1 x)
  Tensor<T> enc2;     // relu(E2 enc1), half resolution
  Tensor<T> hgt1;     // relu(H1 enc2)
  Tensor<T> hgt_up;   // up2(hgt1)
  Tensor<T> hgt_out;  // sigmoid(H2 hgt_up), 1 channel
  Tensor<T> seg1;     // relu(S1 enc2)
  Tensor<T> seg_up;   // up2(seg1)
  Tensor<T> logits;   // S2 seg_up, n_classes channels
};

/// Per-pixel class scores, channel-major.
struct SegLogits {
  int n_classes = 0;
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(int c, int x, int y) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  /// Softmax probabilities in the same layout.
  std::vector<float> probabilities() const;
  HierarchyMap argmax() const;
};

template <class T>
Tensor<T> image_to_tensor(const Image& image);

template <class T>
ForwardCache<T> forward_cache(const ToyDualDecoder<T>& model, const Tensor<T>& input);

/// Normalized height prediction and segmentation logits for one image.
struct Prediction {
  NormalizedHeightMap height;
  SegLogits seg;
};

Prediction forward(const ToyDualDecoder<float>& model, const Image& image, double norm_constant);

/// Mean over valid pixels of the delta=1 smooth-L1; `valid` may be empty (all valid).
template <class T>
T smooth_l1(std::span<const T> pred, std::span<const T> target, std::span<const std::uint8_t> valid = {});
double smooth_l1(const Grid<float>& pred, const Grid<float>& target);

/// Mean over pixels of -log softmax(logits)[label], log-sum-exp stabilized.
template <class T>
T cross_entropy(const Tensor<T>& logits, const HierarchyMap& labels);
double cross_entropy(const SegLogits& logits, const HierarchyMap& labels);

template <class T>
T total_loss(T ce, T sl1, const LossWeights& w) {
  return static_cast<T>(w.alpha) * ce + static_cast<T>(w.beta) * sl1;
}

/// One supervised example in network-native form.
template <class T>
struct Sample {
  Tensor<T> image;
  HierarchyMap labels;
  std::vector<T> height_target;        // normalized heights, row-major
  std::vector<std::uint8_t> valid;     // empty means every pixel is valid
};

template <class T>
Sample<T> make_sample(const Image& image, const HierarchyMap& labels, const NormalizedHeightMap& target);

template <class T>
struct LossBreakdown {
  T cross_entropy{};
  T smooth_l1{};
  T total{};
};

template <class T>
LossBreakdown<T> evaluate_loss(const ToyDualDecoder<T>& model, const Sample<T>& sample, const LossWeights& w);

/// Analytic gradient of the weighted loss w.r.t. every parameter, in parameter order.
template <class T>
std::vector<T> backward(const ToyDualDecoder<T>& model, const Sample<T>& sample, const LossWeights& w,
                        LossBreakdown<T>* loss = nullptr);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_layer;
  std::size_t checked = 0;
};

/// Central finite differences in 64-bit against the analytic gradient on a random instance.
GradCheckReport gradcheck(std::uint64_t seed, int size, const LossWeights& w, int n_classes = 4,
                          double step = 1e-5);

/// |a - n| / max(|a|, |n|, floor).
double gradient_relative_error(double analytic, double numeric);

// Checkpoint: `<path>` holds f32le parameters, `<path>.json` the header.
void save_checkpoint(const std::filesystem::path& path, const ToyDualDecoder<float>& model,
                     const nlohmann::json& metadata = nlohmann::json::object());
ToyDualDecoder<float> load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace hgd
