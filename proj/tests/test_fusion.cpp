// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "mkpose/fusion.hpp"
#include "test_util.hpp"

using namespace mkpose;
using ad::Graph;
using ad::Mat;
using ad::Var;

namespace {

// Independent brute-force KNN: full sort by (distance, index).
std::vector<int> brute_knn(const Eigen::RowVector3d& q, const Mat& points, int k) {
  std::vector<std::pair<double, int>> d;
  for (int j = 0; j < points.rows(); ++j)
    d.push_back({(q - points.row(j)).norm(), j});
  std::sort(d.begin(), d.end());
  std::vector<int> idx;
  for (int m = 0; m < k; ++m) idx.push_back(d[static_cast<size_t>(m)].second);
  return idx;
}

}  // namespace

TEST_CASE("knn matches exhaustive search on random instances") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 256, k = 16, n_kpt = 8;
    const Mat points = test::random_mat(n, 3, rng);
    const Mat kpts = test::random_mat(n_kpt, 3, rng);
    Graph g;
    Var p_kpt = g.constant(kpts);
    Var f_obj = g.constant(test::random_mat(n, 4, rng));
    const auto bundle = fusion::build_knn(g, p_kpt, points, f_obj, k);
    for (int i = 0; i < n_kpt; ++i)
      CHECK(bundle.indices[static_cast<size_t>(i)] == brute_knn(kpts.row(i), points, k));
  }
}

TEST_CASE("a keypoint sitting on a point has that point as its nearest neighbor") {
  Rng rng(5);
  const Mat points = test::random_mat(30, 3, rng);
  Mat kpt = points.row(17);
  Graph g;
  const auto bundle = fusion::build_knn(g, g.constant(kpt), points, g.constant(test::random_mat(30, 4, rng)), 1);
  CHECK(bundle.indices[0][0] == 17);
  CHECK(bundle.rel_knn->value.row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rel_kpt vanishes at the centroid and encodings are translation covariant") {
  Rng rng(7);
  const int n = 40;
  const Mat points = test::random_mat(n, 3, rng);
  Mat kpts(2, 3);
  kpts.row(0) = points.colwise().mean();
  kpts.row(1) = test::random_mat(1, 3, rng);

  Graph g;
  auto bundle = fusion::build_knn(g, g.constant(kpts), points, g.constant(test::random_mat(n, 4, rng)), 5);
  CHECK(bundle.rel_kpt->value.row(0).cwiseAbs().maxCoeff() < 1e-12);

  // joint translation leaves both relative encodings unchanged
  const Eigen::RowVector3d delta(0.4, -0.9, 1.7);
  Mat points_t = points;
  points_t.rowwise() += delta;
  Mat kpts_t = kpts;
  kpts_t.rowwise() += delta;
  Graph g2;
  auto bundle_t =
      fusion::build_knn(g2, g2.constant(kpts_t), points_t, g2.constant(test::random_mat(n, 4, rng)), 5);
  CHECK((bundle.rel_kpt->value - bundle_t.rel_kpt->value).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((bundle.rel_knn->value - bundle_t.rel_knn->value).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("build_knn rejects k larger than the cloud") {
  Graph g;
  Mat points = Mat::Zero(4, 3);
  CHECK_THROWS_AS(
      fusion::build_knn(g, g.constant(Mat::Zero(2, 3)), points, g.constant(Mat::Zero(4, 2)), 5),
      std::invalid_argument);
}

TEST_CASE("local attention rows sum to one and identical values pass through") {
  Rng rng(11);
  const int d = 16, n = 64, k = 4, n_kpt = 5;
  ParamStore ps;
  fusion::LocalFuse local(ps, rng, d);

  const Mat points = test::random_mat(n, 3, rng);
  Graph g;
  Var p_kpt = g.constant(test::random_mat(n_kpt, 3, rng));
  Var f_obj = g.constant(test::random_mat(n, d, rng));
  auto bundle = fusion::build_knn(g, p_kpt, points, f_obj, k);
  Mat attn;
  Var out = local.forward(g, ps, g.constant(test::random_mat(n_kpt, d, rng)), bundle, &attn);
  CHECK(out->rows() == n_kpt);
  CHECK(out->cols() == d);
  for (int i = 0; i < n_kpt; ++i)
    for (int h = 0; h < 4; ++h)
      CHECK(attn.block(i, h * k, 1, k).sum() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("a keypoint's local fusion depends only on its own neighborhood") {
  Rng rng(13);
  const int d = 8, n = 32, k = 3, n_kpt = 4;
  ParamStore ps;
  fusion::LocalFuse local(ps, rng, d);

  const Mat points = test::random_mat(n, 3, rng);
  const Mat kpts = test::random_mat(n_kpt, 3, rng);
  const Mat f_kpt = test::random_mat(n_kpt, d, rng);
  Mat f_obj = test::random_mat(n, d, rng);

  Graph g1;
  auto b1 = fusion::build_knn(g1, g1.constant(kpts), points, g1.constant(f_obj), k);
  const Mat out1 = local.forward(g1, ps, g1.constant(f_kpt), b1)->value;

  // perturb the object features of every point not in keypoint 0's list
  const auto& keep = b1.indices[0];
  Mat f_obj2 = f_obj;
  for (int j = 0; j < n; ++j)
    if (std::find(keep.begin(), keep.end(), j) == keep.end()) f_obj2.row(j).array() += 3.0;

  Graph g2;
  auto b2 = fusion::build_knn(g2, g2.constant(kpts), points, g2.constant(f_obj2), k);
  const Mat out2 = local.forward(g2, ps, g2.constant(f_kpt), b2)->value;
  CHECK((out1.row(0) - out2.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((out1.row(1) - out2.row(1)).cwiseAbs().maxCoeff() > 1e-6);  // others do change
}

TEST_CASE("global fusion: identical keypoint features stay identical, shape preserved") {
  Rng rng(17);
  const int d = 16, n_kpt = 6;
  ParamStore ps;
  fusion::GlobalFuse global(ps, rng, d);

  Graph g;
  Mat same_f = test::random_mat(1, d, rng).replicate(n_kpt, 1);
  Mat same_p = test::random_mat(1, 3, rng).replicate(n_kpt, 1);
  Var out = global.forward(g, ps, g.constant(same_f), g.constant(same_p));
  CHECK(out->rows() == n_kpt);
  CHECK(out->cols() == d);
  for (int i = 1; i < n_kpt; ++i)
    CHECK((out->value.row(i) - out->value.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the broadcast global feature equals the arithmetic mean") {
  Rng rng(19);
  const int d = 8, n_kpt = 9;
  const Mat f = test::random_mat(n_kpt, d, rng);
  Graph g;
  Var mean = ad::mean_rows(g.constant(f));
  CHECK((mean->value - f.colwise().mean()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("local+global fusion gradients match finite differences") {
  Rng rng(23);
  const int d = 8, n = 24, k = 3, n_kpt = 3;
  ParamStore ps;
  fusion::LocalFuse local(ps, rng, d);
  fusion::GlobalFuse global(ps, rng, d);

  const Mat points = test::random_mat(n, 3, rng);
  const Mat kpts = test::random_mat(n_kpt, 3, rng);
  const Mat f_obj = test::random_mat(n, d, rng, 0.5);
  const Mat f_kpt = test::random_mat(n_kpt, d, rng, 0.5);

  auto run = [&](const Mat& fk, Var* leaf_out, Graph& g) {
    Var fk_leaf = g.leaf(fk);
    if (leaf_out) *leaf_out = fk_leaf;
    auto bundle = fusion::build_knn(g, g.constant(kpts), points, g.constant(f_obj), k);
    Var mid = local.forward(g, ps, fk_leaf, bundle);
    Var out = global.forward(g, ps, mid, g.constant(kpts));
    return ad::sum_all(out);
  };

  Graph g;
  Var leaf = nullptr;
  Var probe = run(f_kpt, &leaf, g);
  g.backward(probe);
  auto fnum = [&](const Mat& x) {
    Graph g2;
    return run(x, nullptr, g2)->scalar();
  };
  CHECK(test::grad_rel_error(leaf->grad, test::numeric_grad(fnum, f_kpt)) < 1e-3);
}
