// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkpose/config.hpp"
#include "mkpose/geometry.hpp"
#include "mkpose/rng.hpp"

namespace mkpose::datagen {

using geometry::CategoryKind;
using geometry::MatX;
using geometry::Pose;
using geometry::SymmetryDescriptor;
using geometry::Vec3;

struct CategorySpec {
  std::string name;
  CategoryKind kind = CategoryKind::cylinder;
  SymmetryDescriptor symmetry;
  bool conditional_symmetry = false;  // mug_like: symmetric only when the handle is hidden

  // Tight axis-aligned extents of the canonical (unscaled) shape.
  Vec3 canonical_extents = Vec3::Ones();
  // Planar scales tied (s_x == s_z) so the declared rotational symmetry about
  // y is geometrically true.
  bool tie_planar_scale = false;
};

// The six synthetic categories, index == category_id.
const std::vector<CategorySpec>& default_categories();

struct Sample {
  MatX points;  // N x 3 camera frame, float32-representable
  int category_id = 0;
  Pose gt_pose;
  MatX gt_nocs;  // N x 3, float32-representable
  bool handle_visible = false;
  uint64_t seed = 0;
};

// One surface point in the canonical frame plus a part tag (mug handle = 1).
struct SurfacePoint {
  Vec3 p;
  int part = 0;
};

// Uniform-area surface sampling of the canonical shape.
SurfacePoint sample_canonical_surface(CategoryKind kind, Rng& rng);

// Deterministic in (spec, seed, cfg). Applies random similarity, half-space
// occlusion, resampling to exactly cfg.N points, Gaussian jitter, float32
// rounding, and records exact NOCS targets.
Sample generate_sample(const CategorySpec& spec, uint64_t seed, const PipelineConfig& cfg);

struct DatasetMeta {
  int n_points = 0;
  int count = 0;
  uint64_t base_seed = 0;
};

// Round-robin categories; sample i uses seed mix(base_seed, i). Workers split
// the index range; the result is identical to a serial build.
std::vector<Sample> build_dataset(const PipelineConfig& cfg, int count, uint64_t base_seed,
                                  int workers = 1);

// Directory layout: manifest.json plus samples/<id>.points.f32 and
// samples/<id>.nocs.f32 (raw little-endian float32, row-major, SHA-256
// checksums in the manifest). Manifest schema version "mkpose-dataset/1".
void write_dataset(const std::vector<Sample>& samples, const std::string& dir, int n_points,
                   uint64_t base_seed = 0);
std::vector<Sample> read_dataset(const std::string& dir, DatasetMeta* meta = nullptr);

// Raw float32 array helpers shared with the checkpoint container.
void write_f32_file(const std::string& path, const MatX& m);
MatX read_f32_file(const std::string& path, int rows, int cols);
std::string sha256_file(const std::string& path);

}  // namespace mkpose::datagen
