// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/viz.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mkpose::viz {

namespace {

std::vector<geometry::Vec3> box_corners(const Pose& p) {
  std::vector<geometry::Vec3> corners(8);
  for (int c = 0; c < 8; ++c) {
    geometry::Vec3 local(0.5 * p.size.x() * ((c & 1) ? 1 : -1),
                         0.5 * p.size.y() * ((c & 2) ? 1 : -1),
                         0.5 * p.size.z() * ((c & 4) ? 1 : -1));
    corners[static_cast<size_t>(c)] = p.rotation * local + p.translation;
  }
  return corners;
}

constexpr int kEdges[12][2] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {4, 5}, {4, 6},
                               {5, 7}, {6, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

template <typename Plot>
void draw_line(int x0, int y0, int x1, int y1, Plot plot) {
  const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
  for (int i = 0; i <= steps; ++i) {
    const double f = static_cast<double>(i) / steps;
    plot(static_cast<int>(std::lround(x0 + f * (x1 - x0))),
         static_cast<int>(std::lround(y0 + f * (y1 - y0))));
  }
}

}  // namespace

OrthoProjection OrthoProjection::fit(const MatX& points, const std::vector<Pose>& boxes, int width,
                                     int height) {
  double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
  auto grow = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (Eigen::Index i = 0; i < points.rows(); ++i) grow(points(i, 0), points(i, 1));
  for (const Pose& b : boxes)
    for (const auto& c : box_corners(b)) grow(c.x(), c.y());
  if (min_x > max_x) {
    min_x = min_y = -1;
    max_x = max_y = 1;
  }
  const double span_x = std::max(1e-6, max_x - min_x);
  const double span_y = std::max(1e-6, max_y - min_y);
  OrthoProjection proj;
  proj.width = width;
  proj.height = height;
  proj.scale = 0.9 * std::min(width / span_x, height / span_y);
  proj.offset_x = 0.5 * width - proj.scale * 0.5 * (min_x + max_x);
  proj.offset_y = 0.5 * height + proj.scale * 0.5 * (min_y + max_y);
  return proj;
}

std::pair<int, int> OrthoProjection::project(double x, double y) const {
  return {static_cast<int>(std::lround(scale * x + offset_x)),
          static_cast<int>(std::lround(offset_y - scale * y))};
}

std::vector<uint8_t> box_mask(const Pose& pose, const OrthoProjection& proj) {
  std::vector<uint8_t> mask(static_cast<size_t>(proj.width) * proj.height, 0);
  const auto corners = box_corners(pose);
  for (const auto& e : kEdges) {
    const auto [x0, y0] = proj.project(corners[static_cast<size_t>(e[0])].x(),
                                       corners[static_cast<size_t>(e[0])].y());
    const auto [x1, y1] = proj.project(corners[static_cast<size_t>(e[1])].x(),
                                       corners[static_cast<size_t>(e[1])].y());
    draw_line(x0, y0, x1, y1, [&](int x, int y) {
      if (x >= 0 && x < proj.width && y >= 0 && y < proj.height)
        mask[static_cast<size_t>(y) * proj.width + x] = 1;
    });
  }
  return mask;
}

Image render_scene(const MatX& points, const MatX& keypoints, const Pose& pred, const Pose& gt,
                   int width, int height) {
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.assign(static_cast<size_t>(width) * height * 3, 20);

  const auto proj = OrthoProjection::fit(points, {pred, gt}, width, height);
  auto put = [&](int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    uint8_t* px = img.pixel(x, y);
    px[0] = r;
    px[1] = g;
    px[2] = b;
  };

  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto [x, y] = proj.project(points(i, 0), points(i, 1));
    put(x, y, 170, 170, 170);
  }
  for (Eigen::Index i = 0; i < keypoints.rows(); ++i) {
    const auto [x, y] = proj.project(keypoints(i, 0), keypoints(i, 1));
    for (int o = -2; o <= 2; ++o) {
      put(x + o, y, 80, 140, 255);
      put(x, y + o, 80, 140, 255);
    }
  }

  const auto gt_mask = box_mask(gt, proj);
  const auto pred_mask = box_mask(pred, proj);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t i = static_cast<size_t>(y) * width + x;
      if (gt_mask[i]) put(x, y, 40, 220, 60);
      if (pred_mask[i]) put(x, y, 230, 50, 40);
    }
  }
  return img;
}

namespace {

void png_write_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& data) {
  auto write_be32 = [&out](uint32_t v) {
    const uint8_t b[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                          static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  write_be32(static_cast<uint32_t>(data.size()));
  out.write(type, 4);
  if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  write_be32(static_cast<uint32_t>(crc));
}

uint32_t read_be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr(13);
  const uint32_t w = static_cast<uint32_t>(img.width), h = static_cast<uint32_t>(img.height);
  ihdr[0] = w >> 24; ihdr[1] = w >> 16; ihdr[2] = w >> 8; ihdr[3] = w;
  ihdr[4] = h >> 24; ihdr[5] = h >> 16; ihdr[6] = h >> 8; ihdr[7] = h;
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // truecolor
  ihdr[10] = 0;  // deflate
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  png_write_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height) * (1 + 3 * static_cast<size_t>(img.width)));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter type none
    const uint8_t* row = &img.rgb[3 * static_cast<size_t>(y) * img.width];
    raw.insert(raw.end(), row, row + 3 * static_cast<size_t>(img.width));
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png compression failed");
  compressed.resize(bound);
  png_write_chunk(out, "IDAT", compressed);
  png_write_chunk(out, "IEND", {});
}

bool decode_png_header(const std::string& path, int* width, int* height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) return false;

  size_t pos = 8;
  uint32_t w = 0, h = 0;
  std::vector<uint8_t> idat;
  bool saw_end = false;
  while (pos + 12 <= bytes.size() && !saw_end) {
    const uint32_t len = read_be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) return false;
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    uLong crc = crc32(0L, &bytes[pos + 4], 4 + len);
    if (static_cast<uint32_t>(crc) != read_be32(&bytes[pos + 8 + len])) return false;
    if (std::memcmp(type, "IHDR", 4) == 0 && len == 13) {
      w = read_be32(data);
      h = read_be32(data + 4);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
    }
    pos += 12 + len;
  }
  if (!saw_end || w == 0 || h == 0) return false;

  uLongf expect = static_cast<uLongf>(h) * (1 + 3 * static_cast<uLongf>(w));
  std::vector<uint8_t> raw(expect);
  if (uncompress(raw.data(), &expect, idat.data(), static_cast<uLong>(idat.size())) != Z_OK)
    return false;
  if (expect != static_cast<uLongf>(h) * (1 + 3 * static_cast<uLongf>(w))) return false;
  if (width) *width = static_cast<int>(w);
  if (height) *height = static_cast<int>(h);
  return true;
}

}  // namespace mkpose::viz
