// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mkpose/datagen.hpp"

namespace mkpose::metrics {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kGrid = 64;
}  // namespace

std::vector<geometry::Mat3> symmetry_candidates(const SymmetryDescriptor& sym) {
  std::vector<geometry::Mat3> out;
  const int axis = sym.infinite_axis_index();
  if (axis < 0) return sym.finite_rotations;
  out.reserve(sym.finite_rotations.size() * 360);
  for (const auto& rs : sym.finite_rotations)
    for (int deg = 0; deg < 360; ++deg)
      out.push_back(rs * geometry::rot_axis(axis, deg * kPi / 180.0));
  return out;
}

std::pair<double, double> rot_trans_error(const Pose& pred, const Pose& gt,
                                          const SymmetryDescriptor& sym) {
  double best = kPi;
  for (const auto& rs : symmetry_candidates(sym))
    best = std::min(best, geometry::rotation_angle(gt.rotation * rs, pred.rotation));
  const double trans_err = (gt.translation - pred.translation).norm();
  return {best * 180.0 / kPi, trans_err};
}

namespace {

// Corner AABB of an oriented box.
void box_bounds(const Pose& p, geometry::Vec3& lo, geometry::Vec3& hi) {
  lo = p.translation;
  hi = p.translation;
  for (int c = 0; c < 8; ++c) {
    geometry::Vec3 corner(0.5 * p.size.x() * ((c & 1) ? 1 : -1),
                          0.5 * p.size.y() * ((c & 2) ? 1 : -1),
                          0.5 * p.size.z() * ((c & 4) ? 1 : -1));
    const geometry::Vec3 world = p.rotation * corner + p.translation;
    lo = lo.cwiseMin(world);
    hi = hi.cwiseMax(world);
  }
}

Eigen::Array<bool, Eigen::Dynamic, 1> inside_box(const Eigen::MatrixXd& pts, const Pose& p) {
  const Eigen::MatrixXd local =
      (pts.rowwise() - p.translation.transpose()) * p.rotation;  // rows * R == R^T p
  const geometry::Vec3 half = 0.5 * p.size;
  return (local.col(0).array().abs() <= half.x()) && (local.col(1).array().abs() <= half.y()) &&
         (local.col(2).array().abs() <= half.z());
}

}  // namespace

double box_iou(const Pose& pred, const Pose& gt, const SymmetryDescriptor& sym) {
  const auto candidates = symmetry_candidates(sym);

  // Fixed grid covering the ground-truth box plus every rotation of the
  // predicted box about its own center (bounded by the half-diagonal ball).
  geometry::Vec3 lo, hi;
  box_bounds(gt, lo, hi);
  const double pred_radius = 0.5 * pred.size.norm();
  lo = lo.cwiseMin(geometry::Vec3(pred.translation.array() - pred_radius));
  hi = hi.cwiseMax(geometry::Vec3(pred.translation.array() + pred_radius));

  Eigen::MatrixXd pts(kGrid * kGrid * kGrid, 3);
  const geometry::Vec3 step = (hi - lo) / kGrid;
  int row = 0;
  for (int i = 0; i < kGrid; ++i)
    for (int j = 0; j < kGrid; ++j)
      for (int k = 0; k < kGrid; ++k)
        pts.row(row++) << lo.x() + (i + 0.5) * step.x(), lo.y() + (j + 0.5) * step.y(),
            lo.z() + (k + 0.5) * step.z();

  const auto in_gt = inside_box(pts, gt);
  double best = 0.0;
  for (const auto& rs : candidates) {
    Pose rotated = pred;
    rotated.rotation = pred.rotation * rs;
    const auto in_pred = inside_box(pts, rotated);
    const long inter = (in_gt && in_pred).count();
    const long uni = (in_gt || in_pred).count();
    if (uni > 0) best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
  }
  return best;
}

SymmetryDescriptor eval_symmetry(int category_id, bool handle_visible) {
  const auto& spec = datagen::default_categories()[static_cast<size_t>(category_id)];
  if (spec.conditional_symmetry)
    return handle_visible ? SymmetryDescriptor::asymmetric()
                          : SymmetryDescriptor::infinite_about(1);
  return spec.symmetry;
}

EvalRecord make_record(const Pose& pred, const Pose& gt, int category_id, bool handle_visible) {
  const SymmetryDescriptor sym = eval_symmetry(category_id, handle_visible);
  EvalRecord rec;
  rec.category_id = category_id;
  rec.handle_visible = handle_visible;
  const auto [rot_err, trans_err] = rot_trans_error(pred, gt, sym);
  rec.rot_err_deg = rot_err;
  rec.trans_err = trans_err;
  rec.iou = box_iou(pred, gt, sym);
  return rec;
}

namespace {

Scores score_records(const std::vector<EvalRecord>& records) {
  Scores s;
  s.count = static_cast<int>(records.size());
  for (const auto& r : records) {
    s.iou_25 += r.iou >= 0.25;
    s.iou_50 += r.iou >= 0.50;
    s.iou_75 += r.iou >= 0.75;
    s.ap_5deg_2cm += r.rot_err_deg < 5.0 && r.trans_err < 0.02;
    s.ap_10deg_2cm += r.rot_err_deg < 10.0 && r.trans_err < 0.02;
    s.ap_10deg_5cm += r.rot_err_deg < 10.0 && r.trans_err < 0.05;
  }
  const double n = static_cast<double>(s.count);
  s.iou_25 /= n;
  s.iou_50 /= n;
  s.iou_75 /= n;
  s.ap_5deg_2cm /= n;
  s.ap_10deg_2cm /= n;
  s.ap_10deg_5cm /= n;
  return s;
}

nlohmann::json scores_to_json(const Scores& s) {
  nlohmann::json j;
  j["iou_25"] = s.iou_25;
  j["iou_50"] = s.iou_50;
  j["iou_75"] = s.iou_75;
  j["ap_5deg_2cm"] = s.ap_5deg_2cm;
  j["ap_10deg_2cm"] = s.ap_10deg_2cm;
  j["ap_10deg_5cm"] = s.ap_10deg_5cm;
  j["count"] = s.count;
  return j;
}

}  // namespace

Report aggregate(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: empty record list");
  Report rep;
  rep.overall = score_records(records);
  std::map<std::string, std::vector<EvalRecord>> buckets;
  for (const auto& r : records)
    buckets[datagen::default_categories()[static_cast<size_t>(r.category_id)].name].push_back(r);
  for (const auto& [name, recs] : buckets) rep.per_category[name] = score_records(recs);
  return rep;
}

std::string report_to_json(const Report& report) {
  nlohmann::json j;
  j["version"] = "mkpose-report/1";
  const auto overall = scores_to_json(report.overall);
  for (auto it = overall.begin(); it != overall.end(); ++it) j[it.key()] = it.value();
  j["per_category"] = nlohmann::json::object();
  for (const auto& [name, s] : report.per_category) j["per_category"][name] = scores_to_json(s);
  return j.dump(2) + "\n";
}

void save_report(const Report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << report_to_json(report);
}

}  // namespace mkpose::metrics
