// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <memory>

#include "doctest.h"
#include "mkpose/autograd.hpp"
#include "test_util.hpp"

using namespace mkpose;
using ad::Graph;
using ad::Mat;
using ad::Var;
using test::grad_rel_error;
using test::numeric_grad;
using test::random_mat;

namespace {

// Checks d(sum of op output)/d(input k) against central differences.
void check_op(const std::function<Var(Graph&, std::vector<Var>&)>& build,
              std::vector<Mat> inputs, double tol = 1e-7) {
  for (size_t target = 0; target < inputs.size(); ++target) {
    Graph g;
    std::vector<Var> vars;
    for (const Mat& m : inputs) vars.push_back(g.leaf(m));
    Var out = ad::sum_all(build(g, vars));
    g.backward(out);
    const Mat analytic = vars[target]->grad.size() ? vars[target]->grad
                                                   : Mat::Zero(inputs[target].rows(), inputs[target].cols());

    auto f = [&](const Mat& x) {
      Graph g2;
      std::vector<Var> vs;
      for (size_t i = 0; i < inputs.size(); ++i)
        vs.push_back(g2.constant(i == target ? x : inputs[i]));
      return ad::sum_all(build(g2, vs))->scalar();
    };
    const Mat numeric = numeric_grad(f, inputs[target]);
    CAPTURE(target);
    CHECK(grad_rel_error(analytic, numeric) < tol);
  }
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(7);
  const Mat a = random_mat(4, 5, rng);
  const Mat b = random_mat(4, 5, rng, 0.7);

  check_op([](Graph&, std::vector<Var>& v) { return ad::add(v[0], v[1]); }, {a, b});
  check_op([](Graph&, std::vector<Var>& v) { return ad::sub(v[0], v[1]); }, {a, b});
  check_op([](Graph&, std::vector<Var>& v) { return ad::cmul(v[0], v[1]); }, {a, b});
  check_op([](Graph&, std::vector<Var>& v) { return ad::scale(v[0], -2.5); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::add_scalar(v[0], 1.25); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::exp_(v[0]); }, {a}, 1e-6);

  const Mat pos = (b.array().abs() + 0.5).matrix();
  check_op([](Graph&, std::vector<Var>& v) { return ad::cdiv(v[0], v[1]); }, {a, pos}, 1e-6);
  check_op([](Graph&, std::vector<Var>& v) { return ad::sqrt_(v[0]); }, {pos}, 1e-6);
}

TEST_CASE("nonlinearity gradients away from kinks") {
  Rng rng(11);
  Mat a = random_mat(6, 4, rng);
  // keep clear of the non-differentiable points
  a = a.unaryExpr([](double x) { return std::abs(x) < 0.05 ? x + 0.2 : x; });

  check_op([](Graph&, std::vector<Var>& v) { return ad::relu(v[0]); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::leaky_relu(v[0], 0.2); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::elu(v[0]); }, {a}, 1e-6);
  check_op([](Graph&, std::vector<Var>& v) { return ad::smooth_l1(v[0], 1.0); }, {a}, 1e-6);

  Mat away = a.unaryExpr([](double x) { return std::abs(x - 0.5) < 0.05 ? x + 0.2 : x; });
  check_op([](Graph&, std::vector<Var>& v) { return ad::cmin_scalar(v[0], 0.5); }, {away});
}

TEST_CASE("matmul variants and softmax") {
  Rng rng(13);
  const Mat a = random_mat(4, 3, rng);
  const Mat b = random_mat(3, 5, rng);
  const Mat c = random_mat(4, 5, rng);

  check_op([](Graph&, std::vector<Var>& v) { return ad::matmul(v[0], v[1]); }, {a, b}, 1e-6);
  check_op([](Graph&, std::vector<Var>& v) { return ad::matmul(v[0], v[1], true, false); }, {a, c}, 1e-6);
  check_op([](Graph&, std::vector<Var>& v) { return ad::matmul(v[0], v[1], false, true); },
           {c, random_mat(6, 5, rng)}, 1e-6);
  check_op([](Graph&, std::vector<Var>& v) {
    return ad::cmul(ad::softmax_rows(v[0]), v[1]);  // weight rows to make grads generic
  }, {a, random_mat(4, 3, rng)}, 1e-6);
}

TEST_CASE("shape ops route gradients correctly") {
  Rng rng(17);
  const Mat a = random_mat(5, 4, rng);
  const Mat b = random_mat(5, 3, rng);
  const Mat row = random_mat(1, 6, rng);

  check_op([](Graph&, std::vector<Var>& v) { return ad::transpose(v[0]); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::concat_cols(v[0], v[1]); }, {a, b});
  check_op([](Graph&, std::vector<Var>& v) { return ad::slice_cols(v[0], 1, 2); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::repeat_row(v[0], 7); }, {row});
  check_op([](Graph&, std::vector<Var>& v) { return ad::repeat_rows(v[0], 3); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::rows_to_points(v[0], 2); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::mean_rows(v[0]); }, {a});
  check_op([](Graph&, std::vector<Var>& v) { return ad::row_norms(v[0]); }, {a}, 1e-6);

  auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{3, 0, 0, 2});
  check_op([idx](Graph&, std::vector<Var>& v) { return ad::gather_rows(v[0], idx); }, {a});

  auto lists = std::make_shared<const std::vector<std::vector<int>>>(
      std::vector<std::vector<int>>{{0, 1}, {2, 3, 4}, {1}});
  check_op([lists](Graph&, std::vector<Var>& v) { return ad::neighbor_mean(v[0], lists); }, {a});
}

TEST_CASE("weighted min-reductions") {
  Rng rng(19);
  const Mat d = random_mat(4, 6, rng).array().abs().matrix() + Mat::Constant(4, 6, 0.1);
  const Mat w = random_mat(4, 1, rng);
  const Mat wc = random_mat(1, 6, rng);

  check_op([](Graph&, std::vector<Var>& v) { return ad::cmul(ad::row_min(v[0]), v[1]); }, {d, w});
  check_op([](Graph&, std::vector<Var>& v) { return ad::cmul(ad::col_min(v[0]), v[1]); }, {d, wc});
}

TEST_CASE("pairwise distance gradients") {
  Rng rng(23);
  const Mat a = random_mat(5, 3, rng);
  const Mat b = random_mat(7, 3, rng);
  const Mat w = random_mat(5, 7, rng);
  check_op([](Graph&, std::vector<Var>& v) { return ad::cmul(ad::pairwise_dist(v[0], v[1]), v[2]); },
           {a, b, w}, 1e-6);
}

TEST_CASE("select_min picks the first branch within tolerance") {
  Graph g;
  Var a = g.leaf(Mat::Constant(1, 1, 2.0));
  Var b = g.leaf(Mat::Constant(1, 1, 1.0));
  Var c = g.leaf(Mat::Constant(1, 1, 1.0 + 5e-13));
  Var m = ad::select_min({a, ad::scale(b, 1.0), ad::scale(c, 1.0)});
  CHECK(m->scalar() == doctest::Approx(1.0));
  g.backward(m);
  CHECK(b->grad.size() > 0);       // first branch attaining the min gets the gradient
  CHECK(c->grad.size() == 0);
  CHECK(a->grad.size() == 0);
}

TEST_CASE("rot6d produces orthonormal rotations with correct gradients") {
  Rng rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat v = random_mat(1, 6, rng);
    Graph g;
    Var leaf = g.leaf(v);
    Var r = ad::rot6d_to_rotation(leaf);
    const Eigen::Matrix3d rm = r->value;
    CHECK((rm.transpose() * rm - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rm.determinant() == doctest::Approx(1.0).epsilon(1e-12));

    const Mat w = random_mat(3, 3, rng);
    Graph g2;
    Var leaf2 = g2.leaf(v);
    Var probe = ad::sum_all(ad::cmul(ad::rot6d_to_rotation(leaf2), g2.constant(w)));
    g2.backward(probe);
    auto f = [&](const Mat& x) {
      Graph g3;
      return ad::sum_all(ad::cmul(ad::rot6d_to_rotation(g3.leaf(x)), g3.constant(w)))->scalar();
    };
    CHECK(grad_rel_error(leaf2->grad, numeric_grad(f, v)) < 1e-6);
  }
}

TEST_CASE("grouped attention matches a manual per-group computation") {
  Rng rng(31);
  const int groups = 3, k = 4, d = 8, heads = 2;
  const Mat q = random_mat(groups, d, rng);
  const Mat kk = random_mat(groups * k, d, rng);
  const Mat vv = random_mat(groups * k, d, rng);

  Graph g;
  Mat attn;
  Var out = ad::grouped_attention(g.leaf(q), g.leaf(kk), g.leaf(vv), heads, k, &attn);

  const int dh = d / heads;
  for (int gi = 0; gi < groups; ++gi) {
    for (int h = 0; h < heads; ++h) {
      Eigen::RowVectorXd logits =
          q.block(gi, h * dh, 1, dh) * kk.block(gi * k, h * dh, k, dh).transpose() / std::sqrt(dh);
      Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
      Eigen::RowVectorXd a = (e / e.sum()).matrix().transpose();
      CHECK((a - attn.block(gi, h * k, 1, k)).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::RowVectorXd o = a * vv.block(gi * k, h * dh, k, dh);
      CHECK((o - out->value.block(gi, h * dh, 1, dh)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  const Mat w = random_mat(groups, d, rng);
  check_op([&](Graph&, std::vector<Var>& v) {
    return ad::cmul(ad::grouped_attention(v[0], v[1], v[2], heads, k), v[3]);
  }, {q, kk, vv, w}, 1e-6);
}

TEST_CASE("gradients accumulate across reused subexpressions") {
  Rng rng(37);
  const Mat a = random_mat(3, 3, rng);
  check_op([](Graph&, std::vector<Var>& v) { return ad::add(ad::cmul(v[0], v[0]), v[0]); }, {a}, 1e-6);
}
