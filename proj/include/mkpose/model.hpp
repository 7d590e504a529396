// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "mkpose/config.hpp"
#include "mkpose/datagen.hpp"
#include "mkpose/encoders.hpp"
#include "mkpose/fusion.hpp"
#include "mkpose/keypoints.hpp"
#include "mkpose/posehead.hpp"

namespace mkpose {

using ad::Graph;
using ad::Mat;
using ad::Var;
using geometry::Pose;

struct ForwardResult {
  Var f_pc = nullptr;              // N x d2 point features
  Var f_obj = nullptr;             // N x d fused object features
  Var f_obj_enriched = nullptr;    // N x d after positional/global enrichment
  Var f_queries_out = nullptr;     // N_kpt x d decoded queries
  keypoints::KeypointVars kpt;     // heatmap, positions, features
  Var f_kpt_final = nullptr;       // N_kpt x d after GAT (+ fusion stages)
  Var nocs_pred = nullptr;         // N_kpt x 3
  posehead::PoseVars pose;
  keypoints::ReconstructionVars rec;  // empty when the reconstructor is off

  Mat fuse_attention;   // probes captured during the pass
  Mat gat_attention;
  Mat local_attention;
};

// Full pipeline: encoders -> keypoint detection -> graph-enhanced fusion ->
// pose/size heads. Parameters are created deterministically from cfg.seed.
class MkPoseModel {
 public:
  explicit MkPoseModel(const PipelineConfig& cfg);

  ForwardResult forward(Graph& g, const Mat& points, int category_id,
                        const Mat* colors = nullptr) const;

  // Value-level pose per cfg.pose_recovery (regressed heads or closed-form
  // NOCS alignment).
  Pose recover_pose(const ForwardResult& r) const;

  const PipelineConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Training-time symmetry: the generated handle-visibility flag arbitrates
  // the mug's conditional symmetry.
  static geometry::SymmetryDescriptor sample_symmetry(const datagen::Sample& s);

 private:
  PipelineConfig cfg_;
  ParamStore store_;

  encoders::PointEncoder point_enc_;
  encoders::TextEncoder text_enc_;
  std::optional<encoders::RgbEncoder> rgb_enc_;
  encoders::CrossModalFusion fuse_;
  keypoints::Enricher enricher_;
  keypoints::QueryBank query_bank_;
  keypoints::QueryDecoder decoder_;
  keypoints::GatRefiner gat_;
  fusion::LocalFuse local_;
  fusion::GlobalFuse global_;
  posehead::NocsHead nocs_head_;
  posehead::PoseRegressor regressor_;
  keypoints::OffsetHead offsets_;
};

}  // namespace mkpose
