// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/encoders.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace mkpose::encoders {

PointEncoder::PointEncoder(ParamStore& ps, Rng& rng, int d2, int k) : k_(k) {
  lift_ = nn::Linear::create(ps, rng, "enc.point.lift", 3, d2);
  merge_ = nn::Linear::create(ps, rng, "enc.point.merge", 2 * d2, d2);
}

Var PointEncoder::forward(Graph& g, const ParamStore& ps, const Mat& points) const {
  if (!points.allFinite()) throw std::invalid_argument("encode_points: non-finite coordinates");
  Var p = g.constant(points);
  Var f1 = ad::relu(lift_.apply(g, ps, p));
  auto lists = std::make_shared<const std::vector<std::vector<int>>>(
      nn::knn_lists(points, std::min<int>(k_, static_cast<int>(points.rows()))));
  Var pooled = ad::neighbor_mean(f1, lists);
  return ad::relu(merge_.apply(g, ps, ad::concat_cols(f1, pooled)));
}

TextEncoder::TextEncoder(ParamStore& ps, Rng& rng, int n_categories, int d, int tokens)
    : n_categories_(n_categories), d_(d), tokens_(tokens) {
  table_ = ps.add("enc.text.table", orthogonal_init(n_categories, tokens * d, rng));
}

Var TextEncoder::embedding_row(Graph& g, const ParamStore& ps, int category_id) const {
  if (category_id < 0 || category_id >= n_categories_)
    throw std::invalid_argument("encode_text: unknown category id");
  auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{category_id});
  return ad::gather_rows(ps.use(g, table_), idx);
}

Var TextEncoder::forward(Graph& g, const ParamStore& ps, int category_id, int n_rows) const {
  Var row = embedding_row(g, ps, category_id);
  Var tokens = ad::rows_to_points(row, d_);  // tokens x d
  if (tokens_ == 1) return ad::repeat_row(tokens, n_rows);
  auto cycle = std::make_shared<std::vector<int>>();
  cycle->reserve(static_cast<size_t>(n_rows));
  for (int i = 0; i < n_rows; ++i) cycle->push_back(i % tokens_);
  return ad::gather_rows(tokens, cycle);
}

RgbEncoder::RgbEncoder(ParamStore& ps, Rng& rng, int d1) {
  mlp_ = nn::Mlp::create(ps, rng, "enc.rgb", 3, d1, d1);
}

Var RgbEncoder::forward(Graph& g, const ParamStore& ps, const Mat& colors) const {
  if (!colors.allFinite()) throw std::invalid_argument("encode_rgb: non-finite colors");
  return mlp_.apply(g, ps, g.constant(colors));
}

CrossModalFusion::CrossModalFusion(ParamStore& ps, Rng& rng, int query_width, int d, bool use_text)
    : d_(d), use_text_(use_text) {
  wq_ = ps.add("fuse.wq", orthogonal_init(query_width, d, rng));
  if (use_text) {
    wk_ = ps.add("fuse.wk", orthogonal_init(d, d, rng));
    wv_ = ps.add("fuse.wv", orthogonal_init(d, d, rng));
  }
}

Var CrossModalFusion::forward(Graph& g, const ParamStore& ps, Var query_feats, Var text_feats,
                              Mat* attn_probe) const {
  Var q = ad::matmul(query_feats, ps.use(g, wq_));
  if (!use_text_) return q;
  Var k = ad::matmul(text_feats, ps.use(g, wk_));
  Var v = ad::matmul(text_feats, ps.use(g, wv_));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_));
  Var a = ad::softmax_rows(ad::scale(ad::matmul(q, k, false, true), inv_sqrt));
  if (attn_probe) *attn_probe = a->value;
  return ad::matmul(a, v);
}

}  // namespace mkpose::encoders
