// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/posehead.hpp"

#include <stdexcept>

namespace mkpose::posehead {

NocsHead::NocsHead(ParamStore& ps, Rng& rng, int d) {
  attn_ = nn::AttnProj::create(ps, rng, "nocs.attn", d, d, d, /*heads=*/1);
  head_ = nn::Mlp::create(ps, rng, "nocs.head", d, d, 3);
}

Var NocsHead::forward(Graph& g, const ParamStore& ps, Var f_kpt) const {
  Var f = ad::add(f_kpt, nn::attention(g, ps, attn_, f_kpt, f_kpt));
  return head_.apply(g, ps, f);
}

PoseRegressor::PoseRegressor(ParamStore& ps, Rng& rng, int d) {
  mix_ = nn::Mlp::create(ps, rng, "pose.mix", d + 6, d, d);
  Mat rot_bias(1, 6);
  rot_bias << 1, 0, 0, 0, 1, 0;
  rot_head_ = nn::Linear::create_zero(ps, "pose.rot", d, 6, rot_bias);
  trans_head_ = nn::Linear::create_zero(ps, "pose.trans", d, 3, Mat::Zero(1, 3));
  size_head_ = nn::Linear::create_zero(ps, "pose.size", d, 3, Mat::Zero(1, 3));
}

PoseVars PoseRegressor::forward(Graph& g, const ParamStore& ps, Var f_kpt, Var nocs, Var p_kpt,
                                const Eigen::RowVector3d& point_centroid) const {
  Var x = ad::concat_cols(f_kpt, ad::concat_cols(nocs, p_kpt));
  Var pooled = ad::mean_rows(mix_.apply(g, ps, x));
  PoseVars out;
  out.rotation = ad::rot6d_to_rotation(rot_head_.apply(g, ps, pooled));
  out.translation = ad::add(trans_head_.apply(g, ps, pooled), g.constant(point_centroid));
  out.size = ad::exp_(size_head_.apply(g, ps, pooled));
  return out;
}

Pose align_pose(const Mat& nocs, const Mat& p_kpt) {
  geometry::Similarity sim;
  try {
    sim = geometry::umeyama_align(nocs, p_kpt);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("degenerate NOCS prediction");
  }
  Pose pose;
  pose.rotation = sim.rotation;
  pose.translation = sim.translation;
  const Eigen::RowVector3d ptp = nocs.colwise().maxCoeff() - nocs.colwise().minCoeff();
  pose.size = (sim.scale * ptp.transpose()).cwiseMax(1e-6);
  return pose;
}

}  // namespace mkpose::posehead
