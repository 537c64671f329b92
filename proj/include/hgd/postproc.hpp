// Copyright 2026 The HGD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hgd/raster.hpp"

namespace hgd {

inline constexpr double kDefaultMinBuildingHeight = 3.0;

/// Zeroes pixels whose hierarchy class is 0 (ground) and whose height is
/// below `min_building_height`. Every other pixel is left untouched.
HeightMap correct_heights(const HeightMap& heights, const HierarchyMap& seg,
                          double min_building_height = kDefaultMinBuildingHeight);

/// Half-pixel-centered (align-corners-false) bilinear resampling of one plane.
/// Source coordinates are clamped to the border.
std::vector<float> resize_plane_bilinear(std::span<const float> src, int width, int height, int new_width,
                                         int new_height);
/// Nearest-neighbor resampling with the same pixel-center convention.
template <class T>
std::vector<T> resize_plane_nearest(std::span<const T> src, int width, int height, int new_width,
                                    int new_height);

HeightMap resize_bilinear(const HeightMap& map, int new_width, int new_height);
Image resize_bilinear(const Image& image, int new_width, int new_height);

/// Per-pixel maximum over predictions resampled to the target grid.
HeightMap aggregate_multiscale(std::span<const HeightMap> predictions, int target_width, int target_height);

}  // namespace hgd
