// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/fusion.hpp"

#include <algorithm>
#include <stdexcept>

namespace mkpose::fusion {

NeighborhoodBundle build_knn(Graph& g, Var p_kpt, const Mat& points, Var f_obj, int k) {
  const int n = static_cast<int>(points.rows());
  const int n_kpt = p_kpt->rows();
  if (k > n) throw std::invalid_argument("build_knn: k exceeds point count");

  NeighborhoodBundle b;
  b.k = k;
  b.indices.resize(static_cast<size_t>(n_kpt));
  b.flat_indices = std::make_shared<std::vector<int>>();
  b.flat_indices->reserve(static_cast<size_t>(n_kpt) * static_cast<size_t>(k));

  std::vector<std::pair<double, int>> dist(static_cast<size_t>(n));
  for (int i = 0; i < n_kpt; ++i) {
    for (int j = 0; j < n; ++j)
      dist[static_cast<size_t>(j)] = {(p_kpt->value.row(i) - points.row(j)).norm(), j};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    auto& li = b.indices[static_cast<size_t>(i)];
    li.reserve(static_cast<size_t>(k));
    for (int m = 0; m < k; ++m) {
      li.push_back(dist[static_cast<size_t>(m)].second);
      b.flat_indices->push_back(dist[static_cast<size_t>(m)].second);
    }
  }

  b.knn_positions.resize(static_cast<Eigen::Index>(n_kpt) * k, 3);
  for (int i = 0; i < n_kpt * k; ++i)
    b.knn_positions.row(i) = points.row((*b.flat_indices)[static_cast<size_t>(i)]);

  const Eigen::RowVector3d center = points.colwise().mean();
  Mat center_rows = center.replicate(n_kpt, 1);
  b.rel_kpt = ad::sub(p_kpt, g.constant(center_rows));
  b.rel_knn = ad::sub(g.constant(b.knn_positions), ad::repeat_rows(p_kpt, k));
  b.knn_features = ad::gather_rows(f_obj, b.flat_indices);
  return b;
}

LocalFuse::LocalFuse(ParamStore& ps, Rng& rng, int d) {
  rel_kpt_mlp_ = nn::Mlp::create(ps, rng, "local.rel_kpt", 3, d, d);
  rel_knn_mlp_ = nn::Mlp::create(ps, rng, "local.rel_knn", 3, d, d);
  wq_ = ps.add("local.wq", orthogonal_init(d, d, rng));
  wk_ = ps.add("local.wk", orthogonal_init(d, d, rng));
  wv_ = ps.add("local.wv", orthogonal_init(d, d, rng));
  wo_ = ps.add("local.wo", orthogonal_init(d, d, rng));
}

Var LocalFuse::forward(Graph& g, const ParamStore& ps, Var f_kpt, const NeighborhoodBundle& bundle,
                       Mat* attn_probe) const {
  Var fk = ad::add(f_kpt, rel_kpt_mlp_.apply(g, ps, bundle.rel_kpt));
  Var fn = ad::add(bundle.knn_features, rel_knn_mlp_.apply(g, ps, bundle.rel_knn));
  Var q = ad::matmul(fk, ps.use(g, wq_));
  Var kk = ad::matmul(fn, ps.use(g, wk_));
  Var vv = ad::matmul(fn, ps.use(g, wv_));
  Var att = ad::grouped_attention(q, kk, vv, heads_, bundle.k, attn_probe);
  return ad::matmul(att, ps.use(g, wo_));
}

GlobalFuse::GlobalFuse(ParamStore& ps, Rng& rng, int d) {
  abs_mlp_ = nn::Mlp::create(ps, rng, "global.abs", 3, d, d);
  fuse_mlp_ = nn::Mlp::create(ps, rng, "global.fuse", 2 * d, d, d);
  self_attn_ = nn::AttnProj::create(ps, rng, "global.attn", d, d, d, /*heads=*/4);
}

Var GlobalFuse::forward(Graph& g, const ParamStore& ps, Var f_kpt, Var p_kpt,
                        Mat* attn_probe) const {
  Var f = ad::add(f_kpt, abs_mlp_.apply(g, ps, p_kpt));
  Var global = ad::repeat_row(ad::mean_rows(f), f->rows());
  Var fused = fuse_mlp_.apply(g, ps, ad::concat_cols(f, global));
  return ad::add(fused, nn::attention(g, ps, self_attn_, fused, fused, attn_probe));
}

}  // namespace mkpose::fusion
