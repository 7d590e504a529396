// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mkpose/encoders.hpp"
#include "mkpose/nn_common.hpp"

namespace mkpose::keypoints {

using ad::Graph;
using ad::Mat;
using ad::Var;

// Positional + global enrichment:
//   F' = MLP([X, mean(X)]) with X = F_obj + MLP(P).
// The positional MLP's last layer starts at zero, so the module is exactly
// translation-invariant at initialization. With use_global=false the
// mean-pool concat is skipped.
class Enricher {
 public:
  Enricher() = default;
  Enricher(ParamStore& ps, Rng& rng, int d, bool use_global);
  Var forward(Graph& g, const ParamStore& ps, Var f_obj, const Mat& points) const;

 private:
  nn::Mlp pos_;
  nn::Mlp proj_;
  bool use_global_ = true;
};

// Learnable keypoint queries. With text enabled the bank is generated from the
// category embedding through a linear map; otherwise it is a free table shared
// across categories.
class QueryBank {
 public:
  QueryBank() = default;
  QueryBank(ParamStore& ps, Rng& rng, int embed_width, int n_kpt, int d, bool use_text);
  Var make(Graph& g, const ParamStore& ps, const encoders::TextEncoder* text,
           int category_id) const;

 private:
  nn::Linear map_;     // text path
  int table_ = -1;     // no-text path
  int n_kpt_ = 0, d_ = 0;
  bool use_text_ = true;
};

// Two decoder blocks; each is single-head cross-attention (queries attend to
// the enriched object features) plus a feed-forward, both residual.
class QueryDecoder {
 public:
  QueryDecoder() = default;
  QueryDecoder(ParamStore& ps, Rng& rng, int d);
  Var forward(Graph& g, const ParamStore& ps, Var queries, Var f_obj_enriched) const;

 private:
  struct Block {
    nn::AttnProj attn;
    nn::Mlp ff;
  };
  Block blocks_[2];
};

struct KeypointVars {
  Var heatmap;    // N_kpt x N, rows sum to 1
  Var positions;  // N_kpt x 3 = H * P
  Var features;   // N_kpt x d = H * F_obj
};

// Soft heatmap matching: S = cosine(F_kpt_out, F_obj) with eps in the
// denominator, H = row-softmax(S / tau), positions/features are the
// H-weighted sums.
KeypointVars soft_heatmap(Graph& g, Var f_kpt_out, Var f_obj, const Mat& points, double tau,
                          double eps);

// One fully connected GAT layer (self-loops included): 4 heads, leaky-ReLU
// attention scoring, ELU non-linearity, concatenated heads projected back to
// d. Updates features only.
class GatRefiner {
 public:
  GatRefiner() = default;
  GatRefiner(ParamStore& ps, Rng& rng, int d);
  Var forward(Graph& g, const ParamStore& ps, Var f_kpt, Mat* attn_probe = nullptr) const;

 private:
  int w_ = -1, a_src_ = -1, a_dst_ = -1, w_out_ = -1;
  int heads_ = 4;
  int d_ = 0;
};

struct ReconstructionVars {
  Var offsets;     // (N_kpt*N_p) x 3
  Var rec_points;  // (N_kpt*N_p) x 3 = repeated keypoints + offsets
};

// Expands each keypoint into N_p offset points. The offset MLP's last layer
// starts at zero so the reconstruction begins collapsed onto the keypoints.
class OffsetHead {
 public:
  OffsetHead() = default;
  OffsetHead(ParamStore& ps, Rng& rng, int d, int n_p);
  ReconstructionVars forward(Graph& g, const ParamStore& ps, Var f_kpt, Var p_kpt) const;

 private:
  nn::Mlp mlp_;
  int n_p_ = 8;
};

}  // namespace mkpose::keypoints
