// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mkpose/autograd.hpp"
#include "mkpose/params.hpp"
#include "mkpose/rng.hpp"

namespace mkpose::nn {

using ad::Graph;
using ad::Mat;
using ad::Var;

struct Linear {
  int w = -1;
  int b = -1;  // -1: no bias

  static Linear create(ParamStore& ps, Rng& rng, const std::string& name, int in, int out,
                       bool bias = true, bool zero_weight = false);
  // Zero weight, caller-chosen bias row; used by heads that should start at a
  // fixed output.
  static Linear create_zero(ParamStore& ps, const std::string& name, int in, int out,
                            const Mat& bias_row);
  Var apply(Graph& g, const ParamStore& ps, Var x) const;
};

// Linear-ReLU-Linear.
struct Mlp {
  Linear l1, l2;

  static Mlp create(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden, int out,
                    bool zero_last = false);
  Var apply(Graph& g, const ParamStore& ps, Var x) const;
};

struct AttnProj {
  int wq = -1, wk = -1, wv = -1, wo = -1;
  int heads = 1;

  static AttnProj create(ParamStore& ps, Rng& rng, const std::string& name, int q_in, int kv_in,
                         int d, int heads);
};

// Full multi-head attention: every query row attends to every key row.
// Returns (softmax(QK^T/sqrt(dh)) V per head, concatenated) Wo. If probe is
// non-null it receives the attention weights, heads stacked horizontally.
Var attention(Graph& g, const ParamStore& ps, const AttnProj& p, Var q_in, Var kv_in,
              Mat* probe = nullptr);

// K-nearest-neighbor index lists over one point set, self included, ordered by
// (distance, index) ascending. The ordering fixes the arithmetic order of any
// aggregation, which keeps aggregations exactly permutation-equivariant.
std::vector<std::vector<int>> knn_lists(const Mat& points, int k);

}  // namespace mkpose::nn
