// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mkpose/geometry.hpp"
#include "mkpose/nn_common.hpp"

namespace mkpose::posehead {

using ad::Graph;
using ad::Mat;
using ad::Var;
using geometry::Pose;

// Keypoint NOCS regression: one residual self-attention block and an MLP head.
class NocsHead {
 public:
  NocsHead() = default;
  NocsHead(ParamStore& ps, Rng& rng, int d);
  Var forward(Graph& g, const ParamStore& ps, Var f_kpt) const;

 private:
  nn::AttnProj attn_;
  nn::Mlp head_;
};

struct PoseVars {
  Var rotation = nullptr;     // 3x3, orthonormal with det +1 by construction
  Var translation = nullptr;  // 1x3, offset from the observed-point centroid
  Var size = nullptr;         // 1x3, positive via exp
};

// Direct pose regression from pooled keypoint features concatenated with the
// (NOCS, camera) keypoint coordinates. Heads start at identity rotation,
// centroid translation and unit size.
class PoseRegressor {
 public:
  PoseRegressor() = default;
  PoseRegressor(ParamStore& ps, Rng& rng, int d);
  PoseVars forward(Graph& g, const ParamStore& ps, Var f_kpt, Var nocs, Var p_kpt,
                   const Eigen::RowVector3d& point_centroid) const;

 private:
  nn::Mlp mix_;
  nn::Linear rot_head_, trans_head_, size_head_;
};

// Deterministic alternative: similarity alignment of predicted NOCS onto the
// keypoint camera positions; size is the NOCS peak-to-peak extent times the
// recovered scale. Throws "degenerate NOCS prediction" on a collapsed spread.
Pose align_pose(const Mat& nocs, const Mat& p_kpt);

}  // namespace mkpose::posehead
