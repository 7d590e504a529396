// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "mkpose/rng.hpp"

namespace mkpose::geometry {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using MatX = Eigen::MatrixXd;

// Synthetic benchmark categories. Shape definitions live in datagen; the
// symmetry groups are owned here.
enum class CategoryKind { cylinder, cone, square_prism, rect_box, mug_like, l_shape };
inline constexpr int kNumCategories = 6;

const char* category_name(CategoryKind kind);
CategoryKind category_from_name(const std::string& name);

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 size = Vec3::Ones();  // full extents along the object axes, all > 0
};

bool is_rotation(const Mat3& r, double tol = 1e-6);
void validate_pose(const Pose& pose);

Mat3 rot_x(double angle_rad);
Mat3 rot_y(double angle_rad);
Mat3 rot_z(double angle_rad);
Mat3 rot_axis(int axis, double angle_rad);

// Geodesic angle between two rotations, radians: 2 asin(|A - B|_F / (2 sqrt 2)).
double rotation_angle(const Mat3& a, const Mat3& b);

struct SymmetryDescriptor {
  std::vector<Mat3> finite_rotations;   // always contains the identity
  std::array<bool, 3> infinite_axis{};  // at most one true

  bool has_infinite_axis() const { return infinite_axis[0] || infinite_axis[1] || infinite_axis[2]; }
  int infinite_axis_index() const;  // -1 when none
  // Eq-style indicator vector: (1 - I(x), 1 - I(y), 1 - I(z)).
  Vec3 infinite_symmetry_vector() const;
  // Diagonal comparison mask: diag(I(x), I(y), I(z)) when an infinite axis is
  // declared (only the axis column of R is pose-observable), identity otherwise.
  Mat3 comparison_mask() const;
  void validate() const;

  static SymmetryDescriptor asymmetric();
  static SymmetryDescriptor infinite_about(int axis);
  static SymmetryDescriptor n_fold(int axis, int n);
};

// n-fold symmetry group declared for each synthetic category.
std::vector<Mat3> finite_group_for(CategoryKind kind);
SymmetryDescriptor symmetry_for(CategoryKind kind);

// Camera-frame points -> normalized object coordinates: R^T (p - t) / |s|_2.
MatX nocs_coords(const MatX& points, const Pose& pose);
// Inverse mapping: s-norm * R * q + t.
MatX nocs_to_camera(const MatX& nocs, const Pose& pose);

struct Similarity {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
};

// Least-squares similarity aligning src onto dst: min sum |s R src_i + t - dst_i|^2.
// Throws on fewer than 3 points or a rank-deficient covariance.
Similarity umeyama_align(const MatX& src, const MatX& dst);

// Uniformly distributed rotation (quaternion method).
Mat3 random_rotation(Rng& rng);

}  // namespace mkpose::geometry
