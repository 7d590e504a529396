// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/model.hpp"

#include <stdexcept>

namespace mkpose {

MkPoseModel::MkPoseModel(const PipelineConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(Rng::mix(cfg.seed, 0x6d6f64656cULL));
  const int n_cat = geometry::kNumCategories;

  point_enc_ = encoders::PointEncoder(store_, rng, cfg.d2, cfg.k);
  text_enc_ = encoders::TextEncoder(store_, rng, n_cat, cfg.d, cfg.text_tokens);
  int query_width = cfg.d2;
  if (cfg.rgb_provider == "per_point_color_mlp") {
    rgb_enc_.emplace(store_, rng, cfg.d1);
    query_width += cfg.d1;
  }
  fuse_ = encoders::CrossModalFusion(store_, rng, query_width, cfg.d, cfg.use_text);
  enricher_ = keypoints::Enricher(store_, rng, cfg.d, cfg.use_global);
  query_bank_ = keypoints::QueryBank(store_, rng, cfg.text_tokens * cfg.d, cfg.N_kpt, cfg.d,
                                     cfg.use_text);
  decoder_ = keypoints::QueryDecoder(store_, rng, cfg.d);
  gat_ = keypoints::GatRefiner(store_, rng, cfg.d);
  if (cfg.use_fusion) {
    local_ = fusion::LocalFuse(store_, rng, cfg.d);
    global_ = fusion::GlobalFuse(store_, rng, cfg.d);
  }
  nocs_head_ = posehead::NocsHead(store_, rng, cfg.d);
  regressor_ = posehead::PoseRegressor(store_, rng, cfg.d);
  if (cfg.use_reconstructor) offsets_ = keypoints::OffsetHead(store_, rng, cfg.d, cfg.N_p);
}

ForwardResult MkPoseModel::forward(Graph& g, const Mat& points, int category_id,
                                   const Mat* colors) const {
  if (static_cast<int>(points.rows()) != cfg_.N)
    throw std::invalid_argument("forward: point count does not match config N");

  ForwardResult r;
  r.f_pc = point_enc_.forward(g, store_, points);
  Var queries_in = r.f_pc;
  if (rgb_enc_) {
    if (!colors) throw std::invalid_argument("forward: rgb provider configured but no colors given");
    queries_in = ad::concat_cols(rgb_enc_->forward(g, store_, *colors), r.f_pc);
  }
  Var f_text = cfg_.use_text ? text_enc_.forward(g, store_, category_id, cfg_.N) : nullptr;
  r.f_obj = fuse_.forward(g, store_, queries_in, f_text, &r.fuse_attention);

  r.f_obj_enriched = enricher_.forward(g, store_, r.f_obj, points);
  Var queries = query_bank_.make(g, store_, &text_enc_, category_id);
  r.f_queries_out = decoder_.forward(g, store_, queries, r.f_obj_enriched);
  r.kpt = keypoints::soft_heatmap(g, r.f_queries_out, r.f_obj, points, cfg_.tau, cfg_.eps);

  Var f = gat_.forward(g, store_, r.kpt.features, &r.gat_attention);
  if (cfg_.use_fusion) {
    auto bundle = fusion::build_knn(g, r.kpt.positions, points, r.f_obj, cfg_.k);
    f = local_.forward(g, store_, f, bundle, &r.local_attention);
    f = global_.forward(g, store_, f, r.kpt.positions);
  }
  r.f_kpt_final = f;

  r.nocs_pred = nocs_head_.forward(g, store_, f);
  r.pose = regressor_.forward(g, store_, f, r.nocs_pred, r.kpt.positions,
                              points.colwise().mean());
  if (cfg_.use_reconstructor) r.rec = offsets_.forward(g, store_, f, r.kpt.positions);
  return r;
}

Pose MkPoseModel::recover_pose(const ForwardResult& r) const {
  if (cfg_.pose_recovery == PoseRecovery::align)
    return posehead::align_pose(r.nocs_pred->value, r.kpt.positions->value);
  Pose p;
  p.rotation = r.pose.rotation->value;
  p.translation = r.pose.translation->value.row(0).transpose();
  p.size = r.pose.size->value.row(0).transpose();
  return p;
}

geometry::SymmetryDescriptor MkPoseModel::sample_symmetry(const datagen::Sample& s) {
  const auto& spec = datagen::default_categories()[static_cast<size_t>(s.category_id)];
  if (spec.conditional_symmetry && !s.handle_visible)
    return geometry::SymmetryDescriptor::infinite_about(1);
  return spec.symmetry;
}

}  // namespace mkpose
