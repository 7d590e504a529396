// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/keypoints.hpp"

#include <stdexcept>

namespace mkpose::keypoints {

Enricher::Enricher(ParamStore& ps, Rng& rng, int d, bool use_global) : use_global_(use_global) {
  pos_ = nn::Mlp::create(ps, rng, "enrich.pos", 3, d, d, /*zero_last=*/true);
  proj_ = nn::Mlp::create(ps, rng, "enrich.proj", use_global ? 2 * d : d, d, d);
}

Var Enricher::forward(Graph& g, const ParamStore& ps, Var f_obj, const Mat& points) const {
  Var x = ad::add(f_obj, pos_.apply(g, ps, g.constant(points)));
  if (!use_global_) return proj_.apply(g, ps, x);
  Var global = ad::repeat_row(ad::mean_rows(x), x->rows());
  return proj_.apply(g, ps, ad::concat_cols(x, global));
}

QueryBank::QueryBank(ParamStore& ps, Rng& rng, int embed_width, int n_kpt, int d, bool use_text)
    : n_kpt_(n_kpt), d_(d), use_text_(use_text) {
  if (use_text)
    map_ = nn::Linear::create(ps, rng, "queries.map", embed_width, n_kpt * d);
  else
    table_ = ps.add("queries.table", orthogonal_init(n_kpt, d, rng));
}

Var QueryBank::make(Graph& g, const ParamStore& ps, const encoders::TextEncoder* text,
                    int category_id) const {
  if (!use_text_) return ps.use(g, table_);
  Var row = text->embedding_row(g, ps, category_id);  // 1 x embed_width
  return ad::rows_to_points(map_.apply(g, ps, row), d_);
}

QueryDecoder::QueryDecoder(ParamStore& ps, Rng& rng, int d) {
  for (int b = 0; b < 2; ++b) {
    const std::string name = "decoder." + std::to_string(b);
    blocks_[b].attn = nn::AttnProj::create(ps, rng, name + ".attn", d, d, d, /*heads=*/1);
    blocks_[b].ff = nn::Mlp::create(ps, rng, name + ".ff", d, 2 * d, d);
  }
}

Var QueryDecoder::forward(Graph& g, const ParamStore& ps, Var queries, Var f_obj_enriched) const {
  Var f = queries;
  for (const Block& blk : blocks_) {
    f = ad::add(f, nn::attention(g, ps, blk.attn, f, f_obj_enriched));
    f = ad::add(f, blk.ff.apply(g, ps, f));
  }
  return f;
}

KeypointVars soft_heatmap(Graph& g, Var f_kpt_out, Var f_obj, const Mat& points, double tau,
                          double eps) {
  if (tau <= 0.0) throw std::invalid_argument("soft_heatmap: tau must be positive");
  Var dots = ad::matmul(f_kpt_out, f_obj, false, true);
  Var norms = ad::matmul(ad::row_norms(f_kpt_out), ad::row_norms(f_obj), false, true);
  Var s = ad::cdiv(dots, ad::add_scalar(norms, eps));
  Var h = ad::softmax_rows(ad::scale(s, 1.0 / tau));
  KeypointVars out;
  out.heatmap = h;
  out.positions = ad::matmul(h, g.constant(points));
  out.features = ad::matmul(h, f_obj);
  return out;
}

GatRefiner::GatRefiner(ParamStore& ps, Rng& rng, int d) : d_(d) {
  if (d % heads_ != 0) throw std::invalid_argument("gat: d must be divisible by 4");
  w_ = ps.add("gat.w", orthogonal_init(d, d, rng));
  a_src_ = ps.add("gat.a_src", normal_init(1, d, rng, 0.1));
  a_dst_ = ps.add("gat.a_dst", normal_init(1, d, rng, 0.1));
  w_out_ = ps.add("gat.w_out", orthogonal_init(d, d, rng));
}

Var GatRefiner::forward(Graph& g, const ParamStore& ps, Var f_kpt, Mat* attn_probe) const {
  const int n = f_kpt->rows();
  const int dh = d_ / heads_;
  Var z = ad::matmul(f_kpt, ps.use(g, w_));
  Var a_src = ps.use(g, a_src_);
  Var a_dst = ps.use(g, a_dst_);
  Var ones_row = g.constant(Mat::Ones(1, n));
  Var ones_col = g.constant(Mat::Ones(n, 1));

  if (attn_probe) attn_probe->resize(n, heads_ * n);
  Var out = nullptr;
  for (int h = 0; h < heads_; ++h) {
    Var zh = ad::slice_cols(z, h * dh, dh);
    Var s_src = ad::matmul(zh, ad::slice_cols(a_src, h * dh, dh), false, true);  // n x 1
    Var s_dst = ad::matmul(zh, ad::slice_cols(a_dst, h * dh, dh), false, true);  // n x 1
    Var logits = ad::add(ad::matmul(s_src, ones_row), ad::matmul(ones_col, ad::transpose(s_dst)));
    Var alpha = ad::softmax_rows(ad::leaky_relu(logits, 0.2));
    if (attn_probe) attn_probe->middleCols(h * n, n) = alpha->value;
    Var oh = ad::matmul(alpha, zh);
    out = h == 0 ? oh : ad::concat_cols(out, oh);
  }
  return ad::matmul(ad::elu(out), ps.use(g, w_out_));
}

OffsetHead::OffsetHead(ParamStore& ps, Rng& rng, int d, int n_p) : n_p_(n_p) {
  mlp_ = nn::Mlp::create(ps, rng, "rec.offsets", d, d, n_p * 3, /*zero_last=*/true);
}

ReconstructionVars OffsetHead::forward(Graph& g, const ParamStore& ps, Var f_kpt, Var p_kpt) const {
  ReconstructionVars out;
  out.offsets = ad::rows_to_points(mlp_.apply(g, ps, f_kpt), 3);
  out.rec_points = ad::add(ad::repeat_rows(p_kpt, n_p_), out.offsets);
  return out;
}

}  // namespace mkpose::keypoints
