// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkpose/geometry.hpp"

namespace mkpose::viz {

using geometry::MatX;
using geometry::Pose;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

  uint8_t* pixel(int x, int y) { return &rgb[3 * (static_cast<size_t>(y) * width + x)]; }
};

// Orthographic x/y projection fitted to a point bound.
struct OrthoProjection {
  double scale = 1.0;
  double offset_x = 0.0, offset_y = 0.0;
  int width = 0, height = 0;

  static OrthoProjection fit(const MatX& points, const std::vector<Pose>& boxes, int width,
                             int height);
  std::pair<int, int> project(double x, double y) const;
};

// Rasterizes the 12 wireframe edges of an oriented box into a binary mask.
std::vector<uint8_t> box_mask(const Pose& pose, const OrthoProjection& proj);

// Point cloud in gray, keypoints as blue crosses, ground truth in green and
// the prediction in red.
Image render_scene(const MatX& points, const MatX& keypoints, const Pose& pred, const Pose& gt,
                   int width = 640, int height = 480);

void write_png(const std::string& path, const Image& img);
// Validates signature, chunk CRCs and the inflated pixel payload; returns the
// decoded dimensions.
bool decode_png_header(const std::string& path, int* width, int* height);

}  // namespace mkpose::viz
