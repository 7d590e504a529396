// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mkpose/nn_common.hpp"

namespace mkpose::encoders {

using ad::Graph;
using ad::Mat;
using ad::Var;

// Point-wise feature network with one k-NN mean-aggregation stage. Exactly
// permutation-equivariant: neighborhoods and their accumulation order are
// functions of coordinates only (ties by original index).
class PointEncoder {
 public:
  PointEncoder() = default;
  PointEncoder(ParamStore& ps, Rng& rng, int d2, int k);
  Var forward(Graph& g, const ParamStore& ps, const Mat& points) const;

 private:
  nn::Linear lift_;
  nn::Linear merge_;
  int k_ = 16;
};

// Per-category embedding table standing in for an external text encoder. The
// embedding splits into `tokens` learned rows of width d; output rows cycle
// through the tokens, so with tokens=1 all N rows are identical.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(ParamStore& ps, Rng& rng, int n_categories, int d, int tokens);
  Var forward(Graph& g, const ParamStore& ps, int category_id, int n_rows) const;

  int n_categories() const { return n_categories_; }
  // 1 x (tokens*d) embedding row for one category, for query generation.
  Var embedding_row(Graph& g, const ParamStore& ps, int category_id) const;

 private:
  int table_ = -1;
  int n_categories_ = 0;
  int d_ = 0;
  int tokens_ = 1;
};

// Optional per-point color MLP (3 -> d1) slot for an external RGB encoder.
class RgbEncoder {
 public:
  RgbEncoder() = default;
  RgbEncoder(ParamStore& ps, Rng& rng, int d1);
  Var forward(Graph& g, const ParamStore& ps, const Mat& colors) const;

 private:
  nn::Mlp mlp_;
};

// Cross-attention fusion of the concatenated geometric/appearance features
// (queries) with the text features (keys and values), single head:
//   F_obj = softmax(Q K^T / sqrt(d)) V.
// Without text the module degrades to the query projection alone.
class CrossModalFusion {
 public:
  CrossModalFusion() = default;
  CrossModalFusion(ParamStore& ps, Rng& rng, int query_width, int d, bool use_text);
  Var forward(Graph& g, const ParamStore& ps, Var query_feats, Var text_feats,
              Mat* attn_probe = nullptr) const;

 private:
  int wq_ = -1, wk_ = -1, wv_ = -1;
  int d_ = 0;
  bool use_text_ = true;
};

}  // namespace mkpose::encoders
