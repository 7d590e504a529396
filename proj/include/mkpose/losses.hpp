// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mkpose/autograd.hpp"
#include "mkpose/config.hpp"
#include "mkpose/geometry.hpp"
#include "mkpose/posehead.hpp"

namespace mkpose::losses {

using ad::Graph;
using ad::Mat;
using ad::Var;
using geometry::Pose;
using geometry::SymmetryDescriptor;

// Symmetry-aware pose/size loss:
//   min_{Rs} |(R_gt Rs - R_pred) D|_F + |t_gt - t_pred| + |s_gt - s_pred|
// where D masks the comparison down to the symmetry-axis column for objects
// with an infinite axis and is the identity otherwise. With sym_aware=false
// the rotation term is the plain Frobenius distance.
Var loss_ps(Graph& g, const posehead::PoseVars& pred, const Pose& gt,
            const SymmetryDescriptor& sym, bool sym_aware = true);

// Mean over keypoints of the distance to the nearest observed point.
Var loss_cd(Graph& g, Var p_kpt, const Mat& points);

// Mean over ordered pairs of 1 - min(|pi - pj|, T) / T.
Var loss_div(Graph& g, Var p_kpt, double threshold);

// Bidirectional chamfer (un-squared) between the reconstruction and the cloud.
Var loss_rec(Graph& g, Var rec_points, const Mat& points);

// Mean offset magnitude.
Var loss_delta(Graph& g, Var offsets);

// Smooth-L1 to the NOCS targets, minimized over the finite symmetry group;
// objects with an infinite axis compare the rotation-invariant per-point pair
// (axis coordinate, in-plane radius) instead of raw coordinates.
Var loss_nocs(Graph& g, Var nocs_pred, const Mat& target_nocs, const SymmetryDescriptor& sym);

struct LossTerms {
  Var ps = nullptr;
  Var cd = nullptr;
  Var div = nullptr;
  Var rec = nullptr;
  Var delta = nullptr;
  Var nocs = nullptr;
};

// lambda1*ps + lambda2*cd + lambda3*div + lambda4*rec + lambda5*delta +
// lambda6*nocs. Null terms contribute zero; a non-finite term raises an error
// naming the component.
Var loss_total(Graph& g, const LossTerms& terms, const PipelineConfig& cfg);

}  // namespace mkpose::losses
