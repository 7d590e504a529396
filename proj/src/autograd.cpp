// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace mkpose::ad {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool any_parent_needs_grad(const std::vector<Node*>& parents) {
  for (const Node* p : parents)
    if (p->needs_grad) return true;
  return false;
}

}  // namespace

Var Graph::constant(Mat v) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(v);
  n.graph = this;
  return &n;
}

Var Graph::leaf(Mat v, int param_id) {
  Var n = constant(std::move(v));
  n->param_id = param_id;
  n->needs_grad = true;
  return n;
}

Var Graph::make(Mat v, std::vector<Node*> parents, std::function<void(Node&)> bp) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(v);
  n.graph = this;
  n.needs_grad = any_parent_needs_grad(parents);
  if (n.needs_grad) {
    n.parents = std::move(parents);
    n.backprop = std::move(bp);
  }
  return &n;
}

void Graph::backward(Var root) {
  check(root->rows() == 1 && root->cols() == 1, "backward root must be 1x1");
  root->grad = Mat::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (!n.needs_grad || !n.backprop || n.grad.size() == 0) continue;
    n.backprop(n);
  }
}

void Graph::collect_param_grads(std::vector<Mat>& sink) const {
  for (const Node& n : nodes_) {
    if (n.param_id < 0 || n.grad.size() == 0) continue;
    Mat& slot = sink[static_cast<size_t>(n.param_id)];
    if (slot.size() == 0)
      slot = n.grad;
    else
      slot += n.grad;
  }
}

void accum(Node* p, const Mat& g) {
  if (!p->needs_grad) return;
  if (p->grad.size() == 0)
    p->grad = g;
  else
    p->grad += g;
}

Mat& grad_buffer(Node* p) {
  if (p->grad.size() == 0) p->grad = Mat::Zero(p->value.rows(), p->value.cols());
  return p->grad;
}

// ---- elementwise ----

Var add(Var a, Var b) {
  check(a->rows() == b->rows() && a->cols() == b->cols(), "add: shape mismatch");
  return a->graph->make(a->value + b->value, {a, b}, [a, b](Node& n) {
    accum(a, n.grad);
    accum(b, n.grad);
  });
}

Var sub(Var a, Var b) {
  check(a->rows() == b->rows() && a->cols() == b->cols(), "sub: shape mismatch");
  return a->graph->make(a->value - b->value, {a, b}, [a, b](Node& n) {
    accum(a, n.grad);
    accum(b, -n.grad);
  });
}

Var add_scalar(Var a, double c) {
  return a->graph->make(a->value.array() + c, {a}, [a](Node& n) { accum(a, n.grad); });
}

Var scale(Var a, double c) {
  return a->graph->make(a->value * c, {a}, [a, c](Node& n) { accum(a, c * n.grad); });
}

Var cmul(Var a, Var b) {
  check(a->rows() == b->rows() && a->cols() == b->cols(), "cmul: shape mismatch");
  return a->graph->make(a->value.cwiseProduct(b->value), {a, b}, [a, b](Node& n) {
    accum(a, n.grad.cwiseProduct(b->value));
    accum(b, n.grad.cwiseProduct(a->value));
  });
}

Var cdiv(Var a, Var b) {
  check(a->rows() == b->rows() && a->cols() == b->cols(), "cdiv: shape mismatch");
  return a->graph->make(a->value.cwiseQuotient(b->value), {a, b}, [a, b](Node& n) {
    accum(a, n.grad.cwiseQuotient(b->value));
    accum(b, -n.grad.cwiseProduct(n.value).cwiseQuotient(b->value));
  });
}

Var relu(Var a) {
  return a->graph->make(a->value.cwiseMax(0.0), {a}, [a](Node& n) {
    accum(a, (a->value.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Var leaky_relu(Var a, double slope) {
  Mat v = a->value.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return a->graph->make(std::move(v), {a}, [a, slope](Node& n) {
    Mat d = a->value.unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    accum(a, d.cwiseProduct(n.grad));
  });
}

Var elu(Var a, double alpha) {
  Mat v = a->value.unaryExpr([alpha](double x) { return x > 0.0 ? x : alpha * (std::exp(x) - 1.0); });
  return a->graph->make(std::move(v), {a}, [a, alpha](Node& n) {
    // for x <= 0: y = alpha(e^x - 1), so dy/dx = y + alpha
    Mat d = a->value.binaryExpr(n.value, [alpha](double x, double y) {
      return x > 0.0 ? 1.0 : y + alpha;
    });
    accum(a, d.cwiseProduct(n.grad));
  });
}

Var exp_(Var a) {
  return a->graph->make(a->value.array().exp(), {a}, [a](Node& n) {
    accum(a, n.grad.cwiseProduct(n.value));
  });
}

Var sqrt_(Var a) {
  return a->graph->make(a->value.cwiseMax(0.0).cwiseSqrt(), {a}, [a](Node& n) {
    Mat d = n.value.unaryExpr([](double y) { return y > 0.0 ? 0.5 / y : 0.0; });
    accum(a, d.cwiseProduct(n.grad));
  });
}

Var cmin_scalar(Var a, double c) {
  return a->graph->make(a->value.cwiseMin(c), {a}, [a, c](Node& n) {
    accum(a, (a->value.array() < c).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Var smooth_l1(Var a, double beta) {
  check(beta > 0.0, "smooth_l1: beta must be positive");
  Mat v = a->value.unaryExpr([beta](double x) {
    const double ax = std::abs(x);
    return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
  });
  return a->graph->make(std::move(v), {a}, [a, beta](Node& n) {
    Mat d = a->value.unaryExpr([beta](double x) {
      if (std::abs(x) < beta) return x / beta;
      return x > 0.0 ? 1.0 : -1.0;
    });
    accum(a, d.cwiseProduct(n.grad));
  });
}

// ---- shape / indexing ----

Var transpose(Var a) {
  return a->graph->make(a->value.transpose(), {a},
                        [a](Node& n) { accum(a, n.grad.transpose()); });
}

Var concat_cols(Var a, Var b) {
  check(a->rows() == b->rows(), "concat_cols: row mismatch");
  Mat v(a->rows(), a->cols() + b->cols());
  v << a->value, b->value;
  const int ca = a->cols(), cb = b->cols();
  return a->graph->make(std::move(v), {a, b}, [a, b, ca, cb](Node& n) {
    accum(a, n.grad.leftCols(ca));
    accum(b, n.grad.rightCols(cb));
  });
}

Var slice_cols(Var a, int j0, int nc) {
  check(j0 >= 0 && j0 + nc <= a->cols(), "slice_cols: out of range");
  return a->graph->make(a->value.middleCols(j0, nc), {a}, [a, j0, nc](Node& n) {
    if (!a->needs_grad) return;
    grad_buffer(a).middleCols(j0, nc) += n.grad;
  });
}

Var gather_rows(Var a, std::shared_ptr<const std::vector<int>> idx) {
  Mat v(static_cast<Eigen::Index>(idx->size()), a->cols());
  for (size_t i = 0; i < idx->size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a->value.row((*idx)[i]);
  return a->graph->make(std::move(v), {a}, [a, idx](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (size_t i = 0; i < idx->size(); ++i)
      g.row((*idx)[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var repeat_row(Var v, int n_rows) {
  check(v->rows() == 1, "repeat_row: input must be 1xd");
  Mat out = v->value.replicate(n_rows, 1);
  return v->graph->make(std::move(out), {v}, [v](Node& n) {
    accum(v, n.grad.colwise().sum());
  });
}

Var repeat_rows(Var a, int times) {
  Mat v(a->rows() * times, a->cols());
  for (int i = 0; i < a->rows(); ++i)
    for (int m = 0; m < times; ++m) v.row(static_cast<Eigen::Index>(i) * times + m) = a->value.row(i);
  return a->graph->make(std::move(v), {a}, [a, times](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (int i = 0; i < a->rows(); ++i)
      for (int m = 0; m < times; ++m) g.row(i) += n.grad.row(static_cast<Eigen::Index>(i) * times + m);
  });
}

Var rows_to_points(Var a, int ncol) {
  check(a->cols() % ncol == 0, "rows_to_points: cols not divisible");
  const int groups = a->cols() / ncol;
  Mat v(a->rows() * groups, ncol);
  for (int i = 0; i < a->rows(); ++i)
    for (int m = 0; m < groups; ++m)
      for (int c = 0; c < ncol; ++c) v(static_cast<Eigen::Index>(i) * groups + m, c) = a->value(i, m * ncol + c);
  return a->graph->make(std::move(v), {a}, [a, ncol, groups](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (int i = 0; i < a->rows(); ++i)
      for (int m = 0; m < groups; ++m)
        for (int c = 0; c < ncol; ++c) g(i, m * ncol + c) += n.grad(static_cast<Eigen::Index>(i) * groups + m, c);
  });
}

// ---- reductions ----

Var mean_rows(Var a) {
  const double inv = 1.0 / static_cast<double>(a->rows());
  Mat v = a->value.colwise().sum() * inv;
  return a->graph->make(std::move(v), {a}, [a, inv](Node& n) {
    if (!a->needs_grad) return;
    grad_buffer(a).rowwise() += (n.grad * inv).row(0);
  });
}

Var sum_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = a->value.sum();
  return a->graph->make(std::move(v), {a}, [a](Node& n) {
    if (!a->needs_grad) return;
    grad_buffer(a).array() += n.grad(0, 0);
  });
}

Var row_norms(Var a) {
  Mat v = a->value.rowwise().norm();
  return a->graph->make(std::move(v), {a}, [a](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (int i = 0; i < a->rows(); ++i) {
      const double nv = n.value(i, 0);
      if (nv > 0.0) g.row(i) += (n.grad(i, 0) / nv) * a->value.row(i);
    }
  });
}

Var row_min(Var a) {
  Mat v(a->rows(), 1);
  auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(a->rows()));
  for (int i = 0; i < a->rows(); ++i) {
    Eigen::Index j;
    v(i, 0) = a->value.row(i).minCoeff(&j);
    (*arg)[static_cast<size_t>(i)] = static_cast<int>(j);
  }
  return a->graph->make(std::move(v), {a}, [a, arg](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (int i = 0; i < a->rows(); ++i) g(i, (*arg)[static_cast<size_t>(i)]) += n.grad(i, 0);
  });
}

Var col_min(Var a) {
  Mat v(1, a->cols());
  auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(a->cols()));
  for (int j = 0; j < a->cols(); ++j) {
    Eigen::Index i;
    v(0, j) = a->value.col(j).minCoeff(&i);
    (*arg)[static_cast<size_t>(j)] = static_cast<int>(i);
  }
  return a->graph->make(std::move(v), {a}, [a, arg](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (int j = 0; j < a->cols(); ++j) g((*arg)[static_cast<size_t>(j)], j) += n.grad(0, j);
  });
}

// ---- linear algebra ----

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Eigen::Index ak = trans_a ? a->value.rows() : a->value.cols();
  const Eigen::Index bk = trans_b ? b->value.cols() : b->value.rows();
  check(ak == bk, "matmul: inner dimension mismatch");
  check(!(trans_a && trans_b), "matmul: double transpose unsupported");
  Mat v;
  if (trans_a)
    v.noalias() = a->value.transpose() * b->value;
  else if (trans_b)
    v.noalias() = a->value * b->value.transpose();
  else
    v.noalias() = a->value * b->value;
  return a->graph->make(std::move(v), {a, b}, [a, b, trans_a, trans_b](Node& n) {
    if (trans_a) {  // o = A^T B
      if (a->needs_grad) grad_buffer(a).noalias() += b->value * n.grad.transpose();
      if (b->needs_grad) grad_buffer(b).noalias() += a->value * n.grad;
    } else if (trans_b) {  // o = A B^T
      if (a->needs_grad) grad_buffer(a).noalias() += n.grad * b->value;
      if (b->needs_grad) grad_buffer(b).noalias() += n.grad.transpose() * a->value;
    } else {  // o = A B
      if (a->needs_grad) grad_buffer(a).noalias() += n.grad * b->value.transpose();
      if (b->needs_grad) grad_buffer(b).noalias() += a->value.transpose() * n.grad;
    }
  });
}

Var softmax_rows(Var a) {
  Mat v(a->rows(), a->cols());
  for (int i = 0; i < a->rows(); ++i) {
    const double m = a->value.row(i).maxCoeff();
    Eigen::ArrayXd e = (a->value.row(i).array() - m).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  return a->graph->make(std::move(v), {a}, [a](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (int i = 0; i < n.rows(); ++i) {
      const double dot = n.grad.row(i).dot(n.value.row(i));
      g.row(i) += (n.grad.row(i).array() - dot).matrix().cwiseProduct(n.value.row(i));
    }
  });
}

// ---- compound ----

Var neighbor_mean(Var a, std::shared_ptr<const std::vector<std::vector<int>>> lists) {
  Mat v = Mat::Zero(static_cast<Eigen::Index>(lists->size()), a->cols());
  for (size_t i = 0; i < lists->size(); ++i) {
    const auto& nb = (*lists)[i];
    for (int j : nb) v.row(static_cast<Eigen::Index>(i)) += a->value.row(j);
    v.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(nb.size());
  }
  return a->graph->make(std::move(v), {a}, [a, lists](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = grad_buffer(a);
    for (size_t i = 0; i < lists->size(); ++i) {
      const auto& nb = (*lists)[i];
      const double inv = 1.0 / static_cast<double>(nb.size());
      for (int j : nb) g.row(j) += inv * n.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var pairwise_dist(Var a, Var b) {
  check(a->cols() == b->cols(), "pairwise_dist: column mismatch");
  Mat v(a->rows(), b->rows());
  for (int i = 0; i < a->rows(); ++i)
    for (int j = 0; j < b->rows(); ++j) v(i, j) = (a->value.row(i) - b->value.row(j)).norm();
  return a->graph->make(std::move(v), {a, b}, [a, b](Node& n) {
    const bool ga = a->needs_grad, gb = b->needs_grad;
    if (!ga && !gb) return;
    Mat* pa = ga ? &grad_buffer(a) : nullptr;
    Mat* pb = gb ? &grad_buffer(b) : nullptr;
    for (int i = 0; i < a->rows(); ++i) {
      for (int j = 0; j < b->rows(); ++j) {
        const double g = n.grad(i, j);
        const double d = n.value(i, j);
        if (g == 0.0 || d <= 0.0) continue;
        const auto diff = (a->value.row(i) - b->value.row(j)) * (g / d);
        if (pa) pa->row(i) += diff;
        if (pb) pb->row(j) -= diff;
      }
    }
  });
}

Var select_min(const std::vector<Var>& branches) {
  check(!branches.empty(), "select_min: empty branch set");
  Graph* g = branches[0]->graph;
  double best = branches[0]->scalar();
  for (Var b : branches) best = std::min(best, b->scalar());
  int pick = 0;
  for (size_t i = 0; i < branches.size(); ++i) {
    if (branches[i]->scalar() <= best + 1e-12) {
      pick = static_cast<int>(i);
      break;
    }
  }
  Mat v(1, 1);
  v(0, 0) = branches[static_cast<size_t>(pick)]->scalar();
  std::vector<Node*> parents(branches.begin(), branches.end());
  Var chosen = branches[static_cast<size_t>(pick)];
  return g->make(std::move(v), std::move(parents), [chosen](Node& n) { accum(chosen, n.grad); });
}

Var rot6d_to_rotation(Var v) {
  check(v->rows() == 1 && v->cols() == 6, "rot6d: input must be 1x6");
  using Vec3 = Eigen::Vector3d;
  const Vec3 a1 = v->value.block<1, 3>(0, 0).transpose();
  const Vec3 a2 = v->value.block<1, 3>(0, 3).transpose();

  Vec3 b1;
  const double n1 = a1.norm();
  bool fallback1 = n1 < 1e-12;
  b1 = fallback1 ? Vec3::UnitX() : Vec3(a1 / n1);

  Vec3 w = a2 - b1.dot(a2) * b1;
  double n2 = w.norm();
  bool fallback2 = n2 < 1e-12;
  if (fallback2) {
    int k;
    b1.cwiseAbs().minCoeff(&k);
    w = Vec3::Unit(k) - b1(k) * b1;
    n2 = w.norm();
  }
  const Vec3 b2 = w / n2;
  const Vec3 b3 = b1.cross(b2);

  Mat rot(3, 3);
  rot.col(0) = b1;
  rot.col(1) = b2;
  rot.col(2) = b3;

  return v->graph->make(std::move(rot), {v},
                        [v, a1, a2, b1, b2, n1, n2, fallback1, fallback2](Node& n) {
    if (!v->needs_grad) return;
    const Vec3 g1 = n.grad.col(0), g2 = n.grad.col(1), g3 = n.grad.col(2);
    // b3 = b1 x b2
    Vec3 gb1 = g1 + b2.cross(g3);
    const Vec3 gb2 = g2 + g3.cross(b1);
    // b2 = w / |w|
    const Vec3 gw = (gb2 - b2 * b2.dot(gb2)) / n2;
    Vec3 ga2 = Vec3::Zero();
    if (!fallback2) {
      // w = a2 - (b1.a2) b1
      ga2 = gw - b1 * b1.dot(gw);
      gb1 += -gw.dot(b1) * a2 - b1.dot(a2) * gw;
    } else {
      // w = e_k - b1(k) b1; treat as function of b1 only
      // dw = -db1(k) b1 - b1(k) db1  (k fixed)
      int k;
      b1.cwiseAbs().minCoeff(&k);
      Vec3 extra = -b1(k) * gw;
      extra(k) += -b1.dot(gw);
      gb1 += extra;
    }
    Mat gv = Mat::Zero(1, 6);
    if (!fallback1) {
      const Vec3 ga1 = (gb1 - b1 * b1.dot(gb1)) / n1;
      gv.block<1, 3>(0, 0) = ga1.transpose();
    }
    gv.block<1, 3>(0, 3) = ga2.transpose();
    accum(v, gv);
  });
}

Var grouped_attention(Var q, Var k, Var v, int heads, int group, Mat* attn_out) {
  const int G = q->rows();
  const int d = q->cols();
  check(d % heads == 0, "grouped_attention: dim not divisible by heads");
  check(k->rows() == G * group && v->rows() == G * group, "grouped_attention: key/value rows");
  check(k->cols() == d && v->cols() == d, "grouped_attention: key/value cols");
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto attn = std::make_shared<Mat>(G, heads * group);  // softmax weights per (row, head)
  Mat out = Mat::Zero(G, d);
  for (int g = 0; g < G; ++g) {
    for (int h = 0; h < heads; ++h) {
      const auto qh = q->value.block(g, h * dh, 1, dh);
      const auto kh = k->value.block(g * group, h * dh, group, dh);
      const auto vh = v->value.block(g * group, h * dh, group, dh);
      Eigen::RowVectorXd logits = (qh * kh.transpose()) * inv_sqrt;
      const double m = logits.maxCoeff();
      Eigen::ArrayXd e = (logits.array() - m).exp();
      Eigen::RowVectorXd a = (e / e.sum()).matrix().transpose();
      attn->block(g, h * group, 1, group) = a;
      out.block(g, h * dh, 1, dh) = a * vh;
    }
  }
  if (attn_out) *attn_out = *attn;

  return q->graph->make(std::move(out), {q, k, v},
                        [q, k, v, heads, group, dh, inv_sqrt, attn](Node& n) {
    const int G = q->rows();
    Mat* gq = q->needs_grad ? &grad_buffer(q) : nullptr;
    Mat* gk = k->needs_grad ? &grad_buffer(k) : nullptr;
    Mat* gv = v->needs_grad ? &grad_buffer(v) : nullptr;
    for (int g = 0; g < G; ++g) {
      for (int h = 0; h < heads; ++h) {
        const auto qh = q->value.block(g, h * dh, 1, dh);
        const auto kh = k->value.block(g * group, h * dh, group, dh);
        const auto vh = v->value.block(g * group, h * dh, group, dh);
        const auto a = attn->block(g, h * group, 1, group);
        const auto go = n.grad.block(g, h * dh, 1, dh);
        if (gv) gv->block(g * group, h * dh, group, dh) += a.transpose() * go;
        Eigen::RowVectorXd da = go * vh.transpose();
        const double dot = (da.cwiseProduct(a)).sum();
        Eigen::RowVectorXd dl = (da.array() - dot).matrix().cwiseProduct(a);
        if (gq) gq->block(g, h * dh, 1, dh) += (dl * kh) * inv_sqrt;
        if (gk) gk->block(g * group, h * dh, group, dh) += (dl.transpose() * qh) * inv_sqrt;
      }
    }
  });
}

}  // namespace mkpose::ad
