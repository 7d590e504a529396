// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/nn_common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mkpose::nn {

Linear Linear::create(ParamStore& ps, Rng& rng, const std::string& name, int in, int out,
                      bool bias, bool zero_weight) {
  Linear l;
  l.w = ps.add(name + ".w", zero_weight ? Mat(Mat::Zero(in, out)) : orthogonal_init(in, out, rng));
  if (bias) l.b = ps.add(name + ".b", Mat::Zero(1, out));
  return l;
}

Linear Linear::create_zero(ParamStore& ps, const std::string& name, int in, int out,
                           const Mat& bias_row) {
  Linear l;
  l.w = ps.add(name + ".w", Mat::Zero(in, out));
  l.b = ps.add(name + ".b", bias_row);
  return l;
}

Var Linear::apply(Graph& g, const ParamStore& ps, Var x) const {
  Var y = ad::matmul(x, ps.use(g, w));
  if (b >= 0) y = ad::add(y, ad::repeat_row(ps.use(g, b), y->rows()));
  return y;
}

Mlp Mlp::create(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden, int out,
                bool zero_last) {
  Mlp m;
  m.l1 = Linear::create(ps, rng, name + ".0", in, hidden);
  m.l2 = Linear::create(ps, rng, name + ".1", hidden, out, true, zero_last);
  return m;
}

Var Mlp::apply(Graph& g, const ParamStore& ps, Var x) const {
  return l2.apply(g, ps, ad::relu(l1.apply(g, ps, x)));
}

AttnProj AttnProj::create(ParamStore& ps, Rng& rng, const std::string& name, int q_in, int kv_in,
                          int d, int heads) {
  if (d % heads != 0) throw std::invalid_argument("attention width not divisible by head count");
  AttnProj p;
  p.heads = heads;
  p.wq = ps.add(name + ".wq", orthogonal_init(q_in, d, rng));
  p.wk = ps.add(name + ".wk", orthogonal_init(kv_in, d, rng));
  p.wv = ps.add(name + ".wv", orthogonal_init(kv_in, d, rng));
  p.wo = ps.add(name + ".wo", orthogonal_init(d, d, rng));
  return p;
}

Var attention(Graph& g, const ParamStore& ps, const AttnProj& p, Var q_in, Var kv_in, Mat* probe) {
  Var q = ad::matmul(q_in, ps.use(g, p.wq));
  Var k = ad::matmul(kv_in, ps.use(g, p.wk));
  Var v = ad::matmul(kv_in, ps.use(g, p.wv));
  const int d = q->cols();
  const int dh = d / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  if (probe) probe->resize(q->rows(), p.heads * k->rows());
  Var out = nullptr;
  for (int h = 0; h < p.heads; ++h) {
    Var qh = ad::slice_cols(q, h * dh, dh);
    Var kh = ad::slice_cols(k, h * dh, dh);
    Var vh = ad::slice_cols(v, h * dh, dh);
    Var a = ad::softmax_rows(ad::scale(ad::matmul(qh, kh, false, true), inv_sqrt));
    if (probe) probe->middleCols(h * k->rows(), k->rows()) = a->value;
    Var oh = ad::matmul(a, vh);
    out = h == 0 ? oh : ad::concat_cols(out, oh);
  }
  return ad::matmul(out, ps.use(g, p.wo));
}

std::vector<std::vector<int>> knn_lists(const Mat& points, int k) {
  const int n = static_cast<int>(points.rows());
  const int kk = std::min(k, n);
  std::vector<std::vector<int>> lists(static_cast<size_t>(n));
  std::vector<std::pair<double, int>> dist(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      dist[static_cast<size_t>(j)] = {(points.row(i) - points.row(j)).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    auto& li = lists[static_cast<size_t>(i)];
    li.reserve(static_cast<size_t>(kk));
    for (int m = 0; m < kk; ++m) li.push_back(dist[static_cast<size_t>(m)].second);
  }
  return lists;
}

}  // namespace mkpose::nn
