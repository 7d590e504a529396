// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "mkpose/geometry.hpp"

namespace mkpose::metrics {

using geometry::Pose;
using geometry::SymmetryDescriptor;

struct EvalRecord {
  double iou = 0.0;
  double rot_err_deg = 0.0;
  double trans_err = 0.0;
  int category_id = 0;
  bool handle_visible = false;
};

// Rotations considered equivalent at evaluation: the finite group, crossed
// with 360 one-degree samples about the infinite axis when one is declared.
std::vector<geometry::Mat3> symmetry_candidates(const SymmetryDescriptor& sym);

// Geodesic rotation error (degrees) minimized over the symmetry candidates,
// plus the Euclidean translation error.
std::pair<double, double> rot_trans_error(const Pose& pred, const Pose& gt,
                                          const SymmetryDescriptor& sym);

// Oriented-box IoU by fixed-grid volumetric sampling (64^3 cell centers over
// the union's bounding region), maximized over the symmetry candidates
// applied to the predicted box.
double box_iou(const Pose& pred, const Pose& gt, const SymmetryDescriptor& sym);

// Evaluation-time symmetry: a mug counts as symmetric about its vertical axis
// only when the handle is not visible.
SymmetryDescriptor eval_symmetry(int category_id, bool handle_visible);

EvalRecord make_record(const Pose& pred, const Pose& gt, int category_id, bool handle_visible);

struct Scores {
  double iou_25 = 0.0, iou_50 = 0.0, iou_75 = 0.0;
  double ap_5deg_2cm = 0.0, ap_10deg_2cm = 0.0, ap_10deg_5cm = 0.0;
  int count = 0;
};

struct Report {
  Scores overall;
  std::map<std::string, Scores> per_category;
};

// Threshold accuracies over ground-truth-matched instances. 1 unit = 1 m, so
// 2 cm = 0.02 units. Throws on an empty record list.
Report aggregate(const std::vector<EvalRecord>& records);

// JSON document, schema "mkpose-report/1".
std::string report_to_json(const Report& report);
void save_report(const Report& report, const std::string& path);

}  // namespace mkpose::metrics
