// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/toy_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hgd/raster_io.hpp"
#include "hgd/rng.hpp"

namespace hgd {

namespace {

std::array<ConvShape, kLayerCount> make_layers(int n_classes) {
  return {{
      {"E1", kImageChannels, kFeatureChannels, 3, 1},
      {"E2", kFeatureChannels, kFeatureChannels, 3, 2},
      {"H1", kFeatureChannels, kFeatureChannels, 3, 1},
      {"H2", kFeatureChannels, 1, 1, 1},
      {"S1", kFeatureChannels, kFeatureChannels, 3, 1},
      {"S2", kFeatureChannels, n_classes, 1, 1},
  }};
}

int conv_out_size(int in, const ConvShape& s) {
  const int pad = s.kernel / 2;
  return (in + 2 * pad - s.kernel) / s.stride + 1;
}

// Output indices o whose tap o*stride + k - pad lands inside [0, in).
std::pair<int, int> valid_range(int out_size, int in_size, int k, int pad, int stride) {
  int lo = 0;
  while (lo < out_size && lo * stride + k - pad < 0) ++lo;
  int hi = out_size;
  while (hi > lo && (hi - 1) * stride + k - pad >= in_size) --hi;
  return {lo, hi};
}

template <class T>
Tensor<T> conv_forward(const Tensor<T>& in, std::span<const T> w, std::span<const T> b, const ConvShape& s) {
  const int ho = conv_out_size(in.height, s);
  const int wo = conv_out_size(in.width, s);
  const int pad = s.kernel / 2;
  Tensor<T> out(s.out_channels, ho, wo);
  for (int o = 0; o < s.out_channels; ++o) {
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(o * out.plane()), out.plane(), b[o]);
  }
  for (int o = 0; o < s.out_channels; ++o) {
    for (int i = 0; i < s.in_channels; ++i) {
      for (int ky = 0; ky < s.kernel; ++ky) {
        const auto [y0, y1] = valid_range(ho, in.height, ky, pad, s.stride);
        for (int kx = 0; kx < s.kernel; ++kx) {
          const auto [x0, x1] = valid_range(wo, in.width, kx, pad, s.stride);
          const T wv = w[((static_cast<std::size_t>(o) * s.in_channels + i) * s.kernel + ky) * s.kernel + kx];
          for (int y = y0; y < y1; ++y) {
            const int iy = y * s.stride + ky - pad;
            T* orow = &out.at(o, y, 0);
            const T* irow = &in.at(i, iy, 0);
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x * s.stride + kx - pad];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates into dw/db; writes din when non-null.
template <class T>
void conv_backward(const Tensor<T>& in, std::span<const T> w, const ConvShape& s, const Tensor<T>& gout,
                   std::span<T> dw, std::span<T> db, Tensor<T>* din) {
  const int pad = s.kernel / 2;
  if (din) *din = Tensor<T>(in.channels, in.height, in.width);
  for (int o = 0; o < s.out_channels; ++o) {
    T acc{};
    const T* g = &gout.data[o * gout.plane()];
    for (std::size_t p = 0; p < gout.plane(); ++p) acc += g[p];
    db[o] += acc;
  }
  for (int o = 0; o < s.out_channels; ++o) {
    for (int i = 0; i < s.in_channels; ++i) {
      for (int ky = 0; ky < s.kernel; ++ky) {
        const auto [y0, y1] = valid_range(gout.height, in.height, ky, pad, s.stride);
        for (int kx = 0; kx < s.kernel; ++kx) {
          const auto [x0, x1] = valid_range(gout.width, in.width, kx, pad, s.stride);
          const std::size_t widx = ((static_cast<std::size_t>(o) * s.in_channels + i) * s.kernel + ky) * s.kernel + kx;
          const T wv = w[widx];
          T acc{};
          for (int y = y0; y < y1; ++y) {
            const int iy = y * s.stride + ky - pad;
            const T* grow = &gout.at(o, y, 0);
            const T* irow = &in.at(i, iy, 0);
            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x * s.stride + kx - pad];
            if (din) {
              T* drow = &din->at(i, iy, 0);
              for (int x = x0; x < x1; ++x) drow[x * s.stride + kx - pad] += wv * grow[x];
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

template <class T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.data) v = v > T{} ? v : T{};
}

// Zeroes gradient where the post-activation value is not positive.
template <class T>
void relu_backward(const Tensor<T>& activated, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(activated.data[i] > T{})) grad.data[i] = T{};
  }
}

template <class T>
Tensor<T> upsample2(const Tensor<T>& in) {
  Tensor<T> out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    }
  }
  return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& gout) {
  Tensor<T> g(gout.channels, gout.height / 2, gout.width / 2);
  for (int c = 0; c < gout.channels; ++c) {
    for (int y = 0; y < gout.height; ++y) {
      for (int x = 0; x < gout.width; ++x) g.at(c, y / 2, x / 2) += gout.at(c, y, x);
    }
  }
  return g;
}

template <class T>
T sigmoid(T z) {
  if (z >= T{}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

// Softmax of the n logits at pixel p, written into probs.
template <class T>
void softmax_at(const Tensor<T>& logits, std::size_t p, std::vector<T>& probs) {
  const std::size_t plane = logits.plane();
  T mx = -std::numeric_limits<T>::infinity();
  for (int c = 0; c < logits.channels; ++c) mx = std::max(mx, logits.data[c * plane + p]);
  T sum{};
  for (int c = 0; c < logits.channels; ++c) {
    probs[c] = std::exp(logits.data[c * plane + p] - mx);
    sum += probs[c];
  }
  for (int c = 0; c < logits.channels; ++c) probs[c] /= sum;
}

template <class T>
void check_input(const ToyDualDecoder<T>& model, const Tensor<T>& input) {
  (void)model;
  if (input.channels != kImageChannels) throw Error("toy network expects a 3-channel image");
  if (input.height < 2 || input.width < 2 || input.height % 2 != 0 || input.width % 2 != 0) {
    throw Error("toy network input dimensions must be even and >= 2, got " + std::to_string(input.width) + "x" +
                std::to_string(input.height));
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw Error("loss weights must be finite and >= 0");
  }
  if (alpha == 0.0 && beta == 0.0) throw Error("loss weights alpha and beta cannot both be 0");
}

template <class T>
ToyDualDecoder<T>::ToyDualDecoder(int n_classes) : n_classes_(n_classes), layers_(make_layers(n_classes)) {
  if (n_classes < 2 || n_classes > 256) throw Error("toy network needs 2..256 classes");
  std::size_t total = 0;
  for (int l = 0; l < kLayerCount; ++l) {
    offsets_[l] = total;
    total += layers_[l].param_count();
  }
  params_.assign(total, T{});
}

template <class T>
ToyDualDecoder<T> ToyDualDecoder<T>::initialized(int n_classes, std::uint64_t seed) {
  ToyDualDecoder model(n_classes);
  model.seed_ = seed;
  Rng rng(seed, 0x6e6574);
  for (int l = 0; l < kLayerCount; ++l) {
    const auto& s = model.layers_[l];
    const double limit = std::sqrt(1.0 / (s.in_channels * s.kernel * s.kernel));
    for (auto& w : model.weights(static_cast<Layer>(l))) w = static_cast<T>(rng.uniform(-limit, limit));
  }
  return model;
}

template <class T>
Tensor<T> image_to_tensor(const Image& image) {
  Tensor<T> t(image.channels, image.height, image.width);
  for (std::size_t i = 0; i < image.data.size(); ++i) t.data[i] = static_cast<T>(image.data[i]);
  return t;
}

template <class T>
ForwardCache<T> forward_cache(const ToyDualDecoder<T>& model, const Tensor<T>& input) {
  check_input(model, input);
  const auto& L = model.layers();
  ForwardCache<T> c;
  c.input = input;
  c.enc1 = conv_forward(input, model.weights(kE1), model.bias(kE1), L[kE1]);
  relu_inplace(c.enc1);
  c.enc2 = conv_forward(c.enc1, model.weights(kE2), model.bias(kE2), L[kE2]);
  relu_inplace(c.enc2);

  c.hgt1 = conv_forward(c.enc2, model.weights(kH1), model.bias(kH1), L[kH1]);
  relu_inplace(c.hgt1);
  c.hgt_up = upsample2(c.hgt1);
  c.hgt_out = conv_forward(c.hgt_up, model.weights(kH2), model.bias(kH2), L[kH2]);
  for (auto& v : c.hgt_out.data) v = sigmoid(v);

  c.seg1 = conv_forward(c.enc2, model.weights(kS1), model.bias(kS1), L[kS1]);
  relu_inplace(c.seg1);
  c.seg_up = upsample2(c.seg1);
  c.logits = conv_forward(c.seg_up, model.weights(kS2), model.bias(kS2), L[kS2]);
  return c;
}

std::vector<float> SegLogits::probabilities() const {
  Tensor<float> t(n_classes, height, width);
  t.data = data;
  std::vector<float> out(data.size());
  std::vector<float> probs(n_classes);
  for (std::size_t p = 0; p < t.plane(); ++p) {
    softmax_at(t, p, probs);
    for (int c = 0; c < n_classes; ++c) out[c * t.plane() + p] = probs[c];
  }
  return out;
}

HierarchyMap SegLogits::argmax() const {
  Grid<std::uint8_t> g(width, height);
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (data[c * plane + p] > data[best * plane + p]) best = c;
    }
    g[p] = static_cast<std::uint8_t>(best);
  }
  return HierarchyMap(std::move(g), n_classes);
}

Prediction forward(const ToyDualDecoder<float>& model, const Image& image, double norm_constant) {
  for (float v : image.data) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error("toy network input values must lie in [0, 1]");
  }
  const auto cache = forward_cache(model, image_to_tensor<float>(image));
  Grid<float> h(image.width, image.height, cache.hgt_out.data);
  SegLogits seg{model.n_classes(), image.width, image.height, cache.logits.data};
  return {NormalizedHeightMap(std::move(h), norm_constant), std::move(seg)};
}

template <class T>
T smooth_l1(std::span<const T> pred, std::span<const T> target, std::span<const std::uint8_t> valid) {
  if (pred.size() != target.size()) throw Error("smooth_l1: shape mismatch");
  if (!valid.empty() && valid.size() != pred.size()) throw Error("smooth_l1: validity mask shape mismatch");
  T sum{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const T d = pred[i] - target[i];
    const T a = std::abs(d);
    sum += a < T{1} ? T{0.5} * d * d : a - T{0.5};
    ++n;
  }
  return n == 0 ? T{} : sum / static_cast<T>(n);
}

double smooth_l1(const Grid<float>& pred, const Grid<float>& target) {
  if (!pred.same_shape(target)) throw Error("smooth_l1: shape mismatch");
  std::vector<double> p(pred.values().begin(), pred.values().end());
  std::vector<double> t(target.values().begin(), target.values().end());
  return smooth_l1<double>(p, t);
}

template <class T>
T cross_entropy(const Tensor<T>& logits, const HierarchyMap& labels) {
  if (logits.width != labels.width() || logits.height != labels.height()) {
    throw Error("cross_entropy: shape mismatch");
  }
  const std::size_t plane = logits.plane();
  if (plane == 0) return T{};
  T sum{};
  for (std::size_t p = 0; p < plane; ++p) {
    const int label = labels[p];
    if (label >= logits.channels) throw Error("cross_entropy: label out of range");
    T mx = -std::numeric_limits<T>::infinity();
    for (int c = 0; c < logits.channels; ++c) mx = std::max(mx, logits.data[c * plane + p]);
    T se{};
    for (int c = 0; c < logits.channels; ++c) se += std::exp(logits.data[c * plane + p] - mx);
    sum += mx + std::log(se) - logits.data[label * plane + p];
  }
  return sum / static_cast<T>(plane);
}

double cross_entropy(const SegLogits& logits, const HierarchyMap& labels) {
  Tensor<double> t(logits.n_classes, logits.height, logits.width);
  for (std::size_t i = 0; i < logits.data.size(); ++i) t.data[i] = logits.data[i];
  return cross_entropy(t, labels);
}

template <class T>
Sample<T> make_sample(const Image& image, const HierarchyMap& labels, const NormalizedHeightMap& target) {
  if (image.width != labels.width() || image.height != labels.height() || image.width != target.width() ||
      image.height != target.height()) {
    throw Error("sample image, labels and height target must share dimensions");
  }
  Sample<T> s;
  s.image = image_to_tensor<T>(image);
  s.labels = labels;
  s.height_target.resize(target.size());
  bool any_nodata = false;
  for (std::size_t i = 0; i < target.size(); ++i) any_nodata |= target.is_nodata(i);
  if (any_nodata) s.valid.assign(target.size(), 1);
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target.is_nodata(i)) {
      s.valid[i] = 0;
      s.height_target[i] = T{};
    } else {
      s.height_target[i] = static_cast<T>(target[i]);
    }
  }
  return s;
}

template <class T>
LossBreakdown<T> evaluate_loss(const ToyDualDecoder<T>& model, const Sample<T>& sample, const LossWeights& w) {
  const auto c = forward_cache(model, sample.image);
  LossBreakdown<T> out;
  out.cross_entropy = cross_entropy(c.logits, sample.labels);
  out.smooth_l1 = smooth_l1<T>(c.hgt_out.data, sample.height_target, sample.valid);
  out.total = total_loss(out.cross_entropy, out.smooth_l1, w);
  return out;
}

template <class T>
std::vector<T> backward(const ToyDualDecoder<T>& model, const Sample<T>& sample, const LossWeights& w,
                        LossBreakdown<T>* loss) {
  const auto c = forward_cache(model, sample.image);
  const auto& L = model.layers();
  const std::size_t plane = c.hgt_out.plane();
  if (sample.height_target.size() != plane) throw Error("backward: height target shape mismatch");

  if (loss) {
    loss->cross_entropy = cross_entropy(c.logits, sample.labels);
    loss->smooth_l1 = smooth_l1<T>(c.hgt_out.data, sample.height_target, sample.valid);
    loss->total = total_loss(loss->cross_entropy, loss->smooth_l1, w);
  }

  std::vector<T> grad(model.params().size(), T{});
  auto dw = [&](Layer l) { return std::span<T>(grad).subspan(model.offset(l), L[l].weight_count()); };
  auto db = [&](Layer l) {
    return std::span<T>(grad).subspan(model.offset(l) + L[l].weight_count(), L[l].out_channels);
  };

  const T alpha = static_cast<T>(w.alpha);
  const T beta = static_cast<T>(w.beta);

  // Height head: smooth-L1 through the sigmoid.
  std::size_t n_valid = plane;
  if (!sample.valid.empty()) n_valid = static_cast<std::size_t>(std::count(sample.valid.begin(), sample.valid.end(), 1));
  Tensor<T> g_z(1, c.hgt_out.height, c.hgt_out.width);
  if (n_valid > 0) {
    const T scale = beta / static_cast<T>(n_valid);
    for (std::size_t p = 0; p < plane; ++p) {
      if (!sample.valid.empty() && !sample.valid[p]) continue;
      const T y = c.hgt_out.data[p];
      const T d = y - sample.height_target[p];
      const T dl = std::abs(d) < T{1} ? d : (d > T{} ? T{1} : T{-1});
      g_z.data[p] = scale * dl * y * (T{1} - y);
    }
  }

  // Segmentation head: softmax cross-entropy.
  Tensor<T> g_logits(c.logits.channels, c.logits.height, c.logits.width);
  {
    const T scale = alpha / static_cast<T>(plane);
    std::vector<T> probs(c.logits.channels);
    for (std::size_t p = 0; p < plane; ++p) {
      softmax_at(c.logits, p, probs);
      const int label = sample.labels[p];
      if (label >= c.logits.channels) throw Error("backward: label out of range");
      for (int k = 0; k < c.logits.channels; ++k) {
        g_logits.data[k * plane + p] = scale * (probs[k] - (k == label ? T{1} : T{}));
      }
    }
  }

  Tensor<T> g_hgt_up, g_seg_up, g_enc2_h, g_enc2_s, g_enc1;
  conv_backward(c.hgt_up, model.weights(kH2), L[kH2], g_z, dw(kH2), db(kH2), &g_hgt_up);
  Tensor<T> g_hgt1 = upsample2_backward(g_hgt_up);
  relu_backward(c.hgt1, g_hgt1);
  conv_backward(c.enc2, model.weights(kH1), L[kH1], g_hgt1, dw(kH1), db(kH1), &g_enc2_h);

  conv_backward(c.seg_up, model.weights(kS2), L[kS2], g_logits, dw(kS2), db(kS2), &g_seg_up);
  Tensor<T> g_seg1 = upsample2_backward(g_seg_up);
  relu_backward(c.seg1, g_seg1);
  conv_backward(c.enc2, model.weights(kS1), L[kS1], g_seg1, dw(kS1), db(kS1), &g_enc2_s);

  Tensor<T> g_enc2 = std::move(g_enc2_h);
  for (std::size_t i = 0; i < g_enc2.data.size(); ++i) g_enc2.data[i] += g_enc2_s.data[i];
  relu_backward(c.enc2, g_enc2);
  conv_backward(c.enc1, model.weights(kE2), L[kE2], g_enc2, dw(kE2), db(kE2), &g_enc1);
  relu_backward(c.enc1, g_enc1);
  conv_backward(c.input, model.weights(kE1), L[kE1], g_enc1, dw(kE1), db(kE1), static_cast<Tensor<T>*>(nullptr));
  return grad;
}

double gradient_relative_error(double analytic, double numeric) {
  constexpr double kFloor = 1e-5;
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// Smallest |pre-activation| over every ReLU in the network.
double relu_margin(const ToyDualDecoder<double>& model, const Tensor<double>& input) {
  const auto& L = model.layers();
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&](Tensor<double> pre) {
    for (double v : pre.data) margin = std::min(margin, std::abs(v));
    relu_inplace(pre);
    return pre;
  };
  const auto e1 = scan(conv_forward(input, model.weights(kE1), model.bias(kE1), L[kE1]));
  const auto e2 = scan(conv_forward(e1, model.weights(kE2), model.bias(kE2), L[kE2]));
  scan(conv_forward(e2, model.weights(kH1), model.bias(kH1), L[kH1]));
  scan(conv_forward(e2, model.weights(kS1), model.bias(kS1), L[kS1]));
  return margin;
}

}  // namespace

GradCheckReport gradcheck(std::uint64_t seed, int size, const LossWeights& w, int n_classes, double step) {
  w.validate();
  // Central differences are only meaningful away from ReLU kinks, so the
  // instance is redrawn until every pre-activation clears this margin.
  constexpr double kKinkMargin = 1e-4;
  constexpr int kMaxDraws = 1000;
  Rng rng(seed, 0x67726164);
  auto model = ToyDualDecoder<double>::initialized(n_classes, seed);
  Sample<double> s;
  for (int draw = 0;; ++draw) {
    if (draw == kMaxDraws) throw Error("gradcheck: no kink-free instance found");
    // Nonzero biases so every unit sits at a generic operating point.
    for (int l = 0; l < kLayerCount; ++l) {
      for (auto& b : model.bias(static_cast<Layer>(l))) b = rng.uniform(-0.1, 0.1);
    }
    s.image = Tensor<double>(kImageChannels, size, size);
    for (auto& v : s.image.data) v = rng.uniform();
    if (relu_margin(model, s.image) >= kKinkMargin) break;
  }
  Grid<std::uint8_t> labels(size, size);
  for (auto& v : labels.values()) v = static_cast<std::uint8_t>(rng.uniform_int(0, n_classes - 1));
  s.labels = HierarchyMap(std::move(labels), n_classes);
  s.height_target.resize(static_cast<std::size_t>(size) * size);
  for (auto& v : s.height_target) v = rng.uniform();

  const auto analytic = backward(model, s, w);
  GradCheckReport report;
  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + step;
    const double up = evaluate_loss(model, s, w).total;
    params[i] = orig - step;
    const double down = evaluate_loss(model, s, w).total;
    params[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double err = gradient_relative_error(analytic[i], numeric);
    ++report.checked;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = i;
    }
  }
  for (int l = 0; l < kLayerCount; ++l) {
    const auto [lo, hi] = model.range(static_cast<Layer>(l));
    if (report.worst_index >= lo && report.worst_index < hi) report.worst_layer = model.layers()[l].name;
  }
  return report;
}

void save_checkpoint(const std::filesystem::path& path, const ToyDualDecoder<float>& model,
                     const nlohmann::json& metadata) {
  json header;
  header["format"] = "hgd-toy-dual-decoder";
  header["version"] = 1;
  header["n_classes"] = model.n_classes();
  header["seed"] = model.seed();
  header["dtype"] = "f32le";
  header["param_count"] = model.params().size();
  header["layers"] = json::array();
  for (const auto& s : model.layers()) {
    header["layers"].push_back({{"name", s.name},
                                {"in_channels", s.in_channels},
                                {"out_channels", s.out_channels},
                                {"kernel", s.kernel},
                                {"stride", s.stride}});
  }
  header["metadata"] = metadata;
  write_bytes(path, encode_f32le(model.params()));
  write_json_file(sidecar_path(path), header);
}

ToyDualDecoder<float> load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
  const json header = read_json_file(sidecar_path(path));
  if (header.value("format", std::string{}) != "hgd-toy-dual-decoder") {
    throw Error(path.string() + " is not a toy dual-decoder checkpoint");
  }
  ToyDualDecoder<float> model(header.at("n_classes").get<int>());
  model.set_seed(header.value("seed", std::uint64_t{0}));
  const auto& layers = header.at("layers");
  if (layers.size() != static_cast<std::size_t>(kLayerCount)) throw Error("checkpoint layer count mismatch");
  for (int l = 0; l < kLayerCount; ++l) {
    const auto& s = model.layers()[l];
    const auto& j = layers[l];
    if (j.at("in_channels").get<int>() != s.in_channels || j.at("out_channels").get<int>() != s.out_channels ||
        j.at("kernel").get<int>() != s.kernel || j.at("stride").get<int>() != s.stride) {
      throw Error(std::string("checkpoint layer ") + s.name + " has an unexpected shape");
    }
  }
  const auto values = decode_f32le(read_bytes(path));
  if (values.size() != model.params().size()) throw Error("checkpoint payload size mismatch");
  std::copy(values.begin(), values.end(), model.params().begin());
  if (metadata) *metadata = header.value("metadata", json::object());
  return model;
}

template class ToyDualDecoder<float>;
template class ToyDualDecoder<double>;
template Tensor<float> image_to_tensor<float>(const Image&);
template Tensor<double> image_to_tensor<double>(const Image&);
template ForwardCache<float> forward_cache(const ToyDualDecoder<float>&, const Tensor<float>&);
template ForwardCache<double> forward_cache(const ToyDualDecoder<double>&, const Tensor<double>&);
template float smooth_l1<float>(std::span<const float>, std::span<const float>, std::span<const std::uint8_t>);
template double smooth_l1<double>(std::span<const double>, std::span<const double>, std::span<const std::uint8_t>);
template float cross_entropy(const Tensor<float>&, const HierarchyMap&);
template double cross_entropy(const Tensor<double>&, const HierarchyMap&);
template Sample<float> make_sample<float>(const Image&, const HierarchyMap&, const NormalizedHeightMap&);
template Sample<double> make_sample<double>(const Image&, const HierarchyMap&, const NormalizedHeightMap&);
template LossBreakdown<float> evaluate_loss(const ToyDualDecoder<float>&, const Sample<float>&, const LossWeights&);
template LossBreakdown<double> evaluate_loss(const ToyDualDecoder<double>&, const Sample<double>&, const LossWeights&);
template std::vector<float> backward(const ToyDualDecoder<float>&, const Sample<float>&, const LossWeights&,
                                     LossBreakdown<float>*);
template std::vector<double> backward(const ToyDualDecoder<double>&, const Sample<double>&, const LossWeights&,
                                      LossBreakdown<double>*);

}  // namespace hgd
