// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace mkpose::geometry {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* category_name(CategoryKind kind) {
  switch (kind) {
    case CategoryKind::cylinder: return "cylinder";
    case CategoryKind::cone: return "cone";
    case CategoryKind::square_prism: return "square_prism";
    case CategoryKind::rect_box: return "rect_box";
    case CategoryKind::mug_like: return "mug_like";
    case CategoryKind::l_shape: return "l_shape";
  }
  throw std::invalid_argument("unknown category kind");
}

CategoryKind category_from_name(const std::string& name) {
  for (int k = 0; k < kNumCategories; ++k) {
    const auto kind = static_cast<CategoryKind>(k);
    if (name == category_name(kind)) return kind;
  }
  throw std::invalid_argument("unknown category name: " + name);
}

bool is_rotation(const Mat3& r, double tol) {
  const Mat3 should_be_i = r.transpose() * r;
  if ((should_be_i - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

void validate_pose(const Pose& pose) {
  if (!is_rotation(pose.rotation)) throw std::invalid_argument("pose rotation is not orthonormal");
  if ((pose.size.array() <= 0.0).any()) throw std::invalid_argument("pose size must be positive");
}

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Mat3 rot_axis(int axis, double a) {
  switch (axis) {
    case 0: return rot_x(a);
    case 1: return rot_y(a);
    case 2: return rot_z(a);
    default: throw std::invalid_argument("axis must be 0, 1 or 2");
  }
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const double fro = (a - b).norm();
  const double s = std::min(1.0, fro / (2.0 * std::sqrt(2.0)));
  return 2.0 * std::asin(s);
}

int SymmetryDescriptor::infinite_axis_index() const {
  for (int i = 0; i < 3; ++i)
    if (infinite_axis[i]) return i;
  return -1;
}

Vec3 SymmetryDescriptor::infinite_symmetry_vector() const {
  return Vec3(infinite_axis[0] ? 0.0 : 1.0, infinite_axis[1] ? 0.0 : 1.0,
              infinite_axis[2] ? 0.0 : 1.0);
}

Mat3 SymmetryDescriptor::comparison_mask() const {
  if (!has_infinite_axis()) return Mat3::Identity();
  Mat3 d = Mat3::Zero();
  for (int i = 0; i < 3; ++i)
    if (infinite_axis[i]) d(i, i) = 1.0;
  return d;
}

void SymmetryDescriptor::validate() const {
  if (finite_rotations.empty()) throw std::invalid_argument("symmetry group is empty");
  int flags = 0;
  for (bool f : infinite_axis) flags += f ? 1 : 0;
  if (flags > 1) throw std::invalid_argument("at most one infinite symmetry axis allowed");

  bool has_identity = false;
  for (const Mat3& r : finite_rotations) {
    if (!is_rotation(r)) throw std::invalid_argument("symmetry element is not a rotation");
    if ((r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6) has_identity = true;
  }
  if (!has_identity) throw std::invalid_argument("symmetry group must contain the identity");

  // closure under composition
  for (const Mat3& a : finite_rotations) {
    for (const Mat3& b : finite_rotations) {
      const Mat3 ab = a * b;
      bool member = false;
      for (const Mat3& c : finite_rotations)
        if ((ab - c).cwiseAbs().maxCoeff() < 1e-6) member = true;
      if (!member) throw std::invalid_argument("symmetry rotations are not closed under composition");
    }
  }
}

SymmetryDescriptor SymmetryDescriptor::asymmetric() {
  SymmetryDescriptor d;
  d.finite_rotations = {Mat3::Identity()};
  return d;
}

SymmetryDescriptor SymmetryDescriptor::infinite_about(int axis) {
  SymmetryDescriptor d = asymmetric();
  d.infinite_axis[static_cast<size_t>(axis)] = true;
  return d;
}

SymmetryDescriptor SymmetryDescriptor::n_fold(int axis, int n) {
  SymmetryDescriptor d;
  for (int i = 0; i < n; ++i) d.finite_rotations.push_back(rot_axis(axis, 2.0 * kPi * i / n));
  return d;
}

std::vector<Mat3> finite_group_for(CategoryKind kind) {
  switch (kind) {
    case CategoryKind::square_prism: return SymmetryDescriptor::n_fold(1, 4).finite_rotations;
    case CategoryKind::rect_box: return SymmetryDescriptor::n_fold(1, 2).finite_rotations;
    case CategoryKind::cylinder:
    case CategoryKind::cone:
    case CategoryKind::mug_like:
    case CategoryKind::l_shape: return {Mat3::Identity()};
  }
  throw std::invalid_argument("unknown category kind");
}

SymmetryDescriptor symmetry_for(CategoryKind kind) {
  SymmetryDescriptor d;
  d.finite_rotations = finite_group_for(kind);
  if (kind == CategoryKind::cylinder || kind == CategoryKind::cone) d.infinite_axis[1] = true;
  return d;
}

MatX nocs_coords(const MatX& points, const Pose& pose) {
  const double snorm = pose.size.norm();
  if (snorm < 1e-9) throw std::invalid_argument("degenerate size");
  MatX centered = points.rowwise() - pose.translation.transpose();
  return (centered * pose.rotation) / snorm;  // rows * R == (R^T p)^T
}

MatX nocs_to_camera(const MatX& nocs, const Pose& pose) {
  const double snorm = pose.size.norm();
  if (snorm < 1e-9) throw std::invalid_argument("degenerate size");
  MatX rotated = nocs * pose.rotation.transpose();
  return (rotated * snorm).rowwise() + pose.translation.transpose();
}

Similarity umeyama_align(const MatX& src, const MatX& dst) {
  if (src.rows() < 3 || src.rows() != dst.rows() || src.cols() != 3 || dst.cols() != 3)
    throw std::invalid_argument("degenerate correspondence set");
  const double n = static_cast<double>(src.rows());

  const Eigen::RowVector3d mu_src = src.colwise().mean();
  const Eigen::RowVector3d mu_dst = dst.colwise().mean();
  const MatX cs = src.rowwise() - mu_src;
  const MatX cd = dst.rowwise() - mu_dst;

  const double var_src = cs.squaredNorm() / n;
  const Mat3 cov = (cd.transpose() * cs) / n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (var_src < 1e-18 || d(1) < 1e-12 * std::max(1.0, d(0)))
    throw std::invalid_argument("degenerate correspondence set");

  Vec3 s = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s(2) = -1.0;

  Similarity out;
  out.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  out.scale = (d.array() * s.array()).sum() / var_src;
  out.translation = mu_dst.transpose() - out.scale * out.rotation * mu_src.transpose();
  return out;
}

Mat3 random_rotation(Rng& rng) {
  // Shoemake's uniform quaternion
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double qx = a * std::sin(2.0 * kPi * u2);
  const double qy = a * std::cos(2.0 * kPi * u2);
  const double qz = b * std::sin(2.0 * kPi * u3);
  const double qw = b * std::cos(2.0 * kPi * u3);
  return Eigen::Quaterniond(qw, qx, qy, qz).toRotationMatrix();
}

}  // namespace mkpose::geometry
