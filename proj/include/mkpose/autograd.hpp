// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

namespace mkpose::ad {

using Mat = Eigen::MatrixXd;

class Graph;

// One tape entry. Nodes are owned by a Graph and live for the duration of a
// single forward/backward pass; parameters enter the tape as leaves carrying
// their ParamStore index.
struct Node {
  Mat value;
  Mat grad;  // allocated lazily during backward
  int param_id = -1;
  bool needs_grad = false;
  Graph* graph = nullptr;
  std::vector<Node*> parents;
  std::function<void(Node&)> backprop;

  int rows() const { return static_cast<int>(value.rows()); }
  int cols() const { return static_cast<int>(value.cols()); }
  double scalar() const { return value(0, 0); }
};

using Var = Node*;

// A single-use tape. Creation order is topological order; backward() walks it
// in reverse. One Graph per sample keeps concurrent forward passes isolated.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat v);
  Var leaf(Mat v, int param_id = -1);
  Var make(Mat v, std::vector<Node*> parents, std::function<void(Node&)> bp);

  // Backpropagates from a 1x1 scalar root.
  void backward(Var root);

  // Adds every leaf gradient into sink[param_id]; sink entries are resized on
  // first touch. Call after backward().
  void collect_param_grads(std::vector<Mat>& sink) const;

  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// Accumulates g into p's gradient, respecting needs_grad.
void accum(Node* p, const Mat& g);
// Ensures p->grad is allocated (zeros); returns it. Only valid if needs_grad.
Mat& grad_buffer(Node* p);

// ---- elementwise / scalar ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_scalar(Var a, double c);
Var scale(Var a, double c);
Var cmul(Var a, Var b);
Var cdiv(Var a, Var b);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var elu(Var a, double alpha = 1.0);
Var exp_(Var a);
Var sqrt_(Var a);                  // d/dx at 0 taken as 0
Var cmin_scalar(Var a, double c);  // min(a, c) elementwise
Var smooth_l1(Var a, double beta);

// ---- shape / indexing ----
Var transpose(Var a);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int j0, int n);
Var gather_rows(Var a, std::shared_ptr<const std::vector<int>> idx);
Var repeat_row(Var v, int n);        // 1xd -> nxd
Var repeat_rows(Var a, int times);   // row i -> rows i*times .. i*times+times-1
Var rows_to_points(Var a, int ncol); // Kx(M*ncol) -> (K*M)xncol, row-major groups

// ---- reductions ----
Var mean_rows(Var a);  // Nxd -> 1xd
Var sum_all(Var a);    // -> 1x1
Var row_norms(Var a);  // Nxd -> Nx1 Euclidean norms
Var row_min(Var a);    // NxK -> Nx1, subgradient to first argmin
Var col_min(Var a);    // NxK -> 1xK

// ---- linear algebra ----
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var softmax_rows(Var a);

// ---- compound ops with hand-written adjoints ----

// Mean of each row's neighbor set; lists[i] are accumulated in list order so
// results are invariant to input permutations that preserve the lists.
Var neighbor_mean(Var a, std::shared_ptr<const std::vector<std::vector<int>>> lists);

// Pairwise Euclidean distances: a is Mx3, b is Kx3 -> MxK.
Var pairwise_dist(Var a, Var b);

// Minimum of a set of 1x1 scalars; gradient flows to the first branch within
// 1e-12 of the minimum.
Var select_min(const std::vector<Var>& branches);

// 1x6 -> 3x3 rotation via Gram-Schmidt of the two 3-vector halves.
Var rot6d_to_rotation(Var v);

// Block-diagonal attention: query row g attends to its own key/value block
// [g*group, (g+1)*group). q: Gxd, k,v: (G*group)xd, d divisible by heads.
// If attn_out != nullptr it receives the Gx(heads*group) attention weights.
Var grouped_attention(Var q, Var k, Var v, int heads, int group, Mat* attn_out = nullptr);

}  // namespace mkpose::ad
