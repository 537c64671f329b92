// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgd/postproc.hpp"

#include <algorithm>
#include <cmath>

namespace hgd {

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Source taps for every destination index along one axis.
std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[d] = {lo, hi, src - lo};
  }
  return taps;
}

double lerp_bounded(double a, double b, double t) {
  const double v = a + t * (b - a);
  return std::clamp(v, std::min(a, b), std::max(a, b));
}

void check_size(int w, int h) {
  if (w < 1 || h < 1) throw Error("resize: target dimensions must be >= 1");
}

}  // namespace

HeightMap correct_heights(const HeightMap& heights, const HierarchyMap& seg, double min_building_height) {
  if (heights.width() != seg.width() || heights.height() != seg.height()) {
    throw Error("correct_heights: heights and segmentation differ in shape");
  }
  std::vector<float> out(heights.values().begin(), heights.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (heights.is_nodata(i)) continue;
    if (seg[i] == 0 && out[i] < min_building_height) out[i] = 0.0f;
  }
  return HeightMap(heights.width(), heights.height(), std::move(out), heights.nodata());
}

std::vector<float> resize_plane_bilinear(std::span<const float> src, int width, int height, int new_width,
                                         int new_height) {
  check_size(new_width, new_height);
  if (width < 1 || height < 1) throw Error("resize: source is empty");
  if (src.size() != static_cast<std::size_t>(width) * height) throw Error("resize: plane size mismatch");
  if (width == new_width && height == new_height) return {src.begin(), src.end()};
  const auto tx = bilinear_taps(width, new_width);
  const auto ty = bilinear_taps(height, new_height);
  std::vector<float> out(static_cast<std::size_t>(new_width) * new_height);
  for (int y = 0; y < new_height; ++y) {
    const float* r0 = &src[static_cast<std::size_t>(ty[y].lo) * width];
    const float* r1 = &src[static_cast<std::size_t>(ty[y].hi) * width];
    for (int x = 0; x < new_width; ++x) {
      const double top = lerp_bounded(r0[tx[x].lo], r0[tx[x].hi], tx[x].frac);
      const double bot = lerp_bounded(r1[tx[x].lo], r1[tx[x].hi], tx[x].frac);
      out[static_cast<std::size_t>(y) * new_width + x] = static_cast<float>(lerp_bounded(top, bot, ty[y].frac));
    }
  }
  return out;
}

template <class T>
std::vector<T> resize_plane_nearest(std::span<const T> src, int width, int height, int new_width,
                                    int new_height) {
  check_size(new_width, new_height);
  if (src.size() != static_cast<std::size_t>(width) * height) throw Error("resize: plane size mismatch");
  std::vector<T> out(static_cast<std::size_t>(new_width) * new_height);
  for (int y = 0; y < new_height; ++y) {
    const int sy = std::min(height - 1, static_cast<int>(std::floor((y + 0.5) * height / new_height)));
    for (int x = 0; x < new_width; ++x) {
      const int sx = std::min(width - 1, static_cast<int>(std::floor((x + 0.5) * width / new_width)));
      out[static_cast<std::size_t>(y) * new_width + x] = src[static_cast<std::size_t>(sy) * width + sx];
    }
  }
  return out;
}

template std::vector<float> resize_plane_nearest(std::span<const float>, int, int, int, int);
template std::vector<std::uint8_t> resize_plane_nearest(std::span<const std::uint8_t>, int, int, int, int);

HeightMap resize_bilinear(const HeightMap& map, int new_width, int new_height) {
  check_size(new_width, new_height);
  if (!map.nodata()) {
    return HeightMap(new_width, new_height,
                     resize_plane_bilinear(map.values(), map.width(), map.height(), new_width, new_height));
  }
  // With nodata present, any output whose support touches a nodata pixel becomes nodata.
  std::vector<float> filled(map.values().begin(), map.values().end());
  std::vector<float> missing(filled.size(), 0.0f);
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (map.is_nodata(i)) {
      filled[i] = 0.0f;
      missing[i] = 1.0f;
    }
  }
  auto out = resize_plane_bilinear(filled, map.width(), map.height(), new_width, new_height);
  const auto miss = resize_plane_bilinear(missing, map.width(), map.height(), new_width, new_height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (miss[i] > 0.0f) out[i] = *map.nodata();
  }
  return HeightMap(new_width, new_height, std::move(out), map.nodata());
}

Image resize_bilinear(const Image& image, int new_width, int new_height) {
  check_size(new_width, new_height);
  Image out(image.channels, new_width, new_height);
  const std::size_t in_plane = static_cast<std::size_t>(image.width) * image.height;
  const std::size_t out_plane = static_cast<std::size_t>(new_width) * new_height;
  for (int c = 0; c < image.channels; ++c) {
    const auto plane = resize_plane_bilinear(std::span<const float>(image.data).subspan(c * in_plane, in_plane),
                                             image.width, image.height, new_width, new_height);
    std::copy(plane.begin(), plane.end(), out.data.begin() + static_cast<std::ptrdiff_t>(c * out_plane));
  }
  return out;
}

HeightMap aggregate_multiscale(std::span<const HeightMap> predictions, int target_width, int target_height) {
  if (predictions.empty()) throw Error("aggregate_multiscale: no predictions");
  check_size(target_width, target_height);
  const std::size_t n = static_cast<std::size_t>(target_width) * target_height;
  std::vector<float> best(n, 0.0f);
  std::vector<std::uint8_t> seen(n, 0);
  for (const auto& p : predictions) {
    const HeightMap r = resize_bilinear(p, target_width, target_height);
    for (std::size_t i = 0; i < n; ++i) {
      if (r.is_nodata(i)) continue;
      if (!seen[i] || r[i] > best[i]) best[i] = r[i];
      seen[i] = 1;
    }
  }
  const auto nodata = predictions.front().nodata();
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) {
      if (!nodata) throw Error("aggregate_multiscale: pixel has no valid prediction");
      best[i] = *nodata;
    }
  }
  return HeightMap(target_width, target_height, std::move(best), nodata);
}

}  // namespace hgd
