// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "mkpose/nn_common.hpp"

namespace mkpose::fusion {

using ad::Graph;
using ad::Mat;
using ad::Var;

struct NeighborhoodBundle {
  std::vector<std::vector<int>> indices;            // N_kpt lists of k point indices
  std::shared_ptr<std::vector<int>> flat_indices;   // row-major flattening
  Var rel_kpt = nullptr;       // N_kpt x 3, keypoint minus object center
  Var rel_knn = nullptr;       // (N_kpt*k) x 3, neighbor minus its keypoint
  Var knn_features = nullptr;  // (N_kpt*k) x d gathered object features
  Mat knn_positions;           // (N_kpt*k) x 3 constants
  int k = 0;
};

// Exhaustive k-nearest neighbors of each keypoint over the observed cloud
// (Euclidean, ties to the smaller point index). Gradients flow through the
// keypoint positions into the relative encodings; the index selection itself
// is discrete.
NeighborhoodBundle build_knn(Graph& g, Var p_kpt, const Mat& points, Var f_obj, int k);

// Relative positional encodings plus per-keypoint multi-head cross-attention
// over that keypoint's own k neighbors.
class LocalFuse {
 public:
  LocalFuse() = default;
  LocalFuse(ParamStore& ps, Rng& rng, int d);
  Var forward(Graph& g, const ParamStore& ps, Var f_kpt, const NeighborhoodBundle& bundle,
              Mat* attn_probe = nullptr) const;

 private:
  nn::Mlp rel_kpt_mlp_;
  nn::Mlp rel_knn_mlp_;
  int wq_ = -1, wk_ = -1, wv_ = -1, wo_ = -1;
  int heads_ = 4;
};

// Absolute positional encoding, keypoint-mean global feature broadcast and
// fused through an MLP, then one residual self-attention block.
class GlobalFuse {
 public:
  GlobalFuse() = default;
  GlobalFuse(ParamStore& ps, Rng& rng, int d);
  Var forward(Graph& g, const ParamStore& ps, Var f_kpt, Var p_kpt,
              Mat* attn_probe = nullptr) const;

 private:
  nn::Mlp abs_mlp_;
  nn::Mlp fuse_mlp_;
  nn::AttnProj self_attn_;
};

}  // namespace mkpose::fusion
