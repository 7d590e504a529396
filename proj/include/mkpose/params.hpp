// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mkpose/autograd.hpp"
#include "mkpose/rng.hpp"

namespace mkpose {

using ad::Mat;

struct Param {
  std::string name;
  Mat value;
  Mat adam_m;
  Mat adam_v;
};

// Named parameter registry. Insertion order is the canonical serialization
// order, so checkpoints are byte-stable.
class ParamStore {
 public:
  int add(const std::string& name, Mat init);
  int find(const std::string& name) const;  // -1 if absent
  Param& at(int id) { return params_[static_cast<size_t>(id)]; }
  const Param& at(int id) const { return params_[static_cast<size_t>(id)]; }
  size_t size() const { return params_.size(); }
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  // Binds parameter id into a tape as a gradient-requiring leaf.
  ad::Var use(ad::Graph& g, int id) const { return g.leaf(at(id).value, id); }

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, int> index_;
};

// Orthogonal init (QR of a Gaussian matrix, sign-fixed), the default for
// projection weights.
Mat orthogonal_init(int rows, int cols, Rng& rng, double gain = 1.0);
Mat normal_init(int rows, int cols, Rng& rng, double stddev);

// Rounds every entry to the nearest float32 value. Parameters and optimizer
// state are kept float32-representable so checkpoints round-trip bit-exactly.
void quantize_f32(Mat& m);

}  // namespace mkpose
