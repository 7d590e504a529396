// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkpose::losses {

namespace {

Var frobenius(Var m) { return ad::sqrt_(ad::sum_all(ad::cmul(m, m))); }

Var mean_all(Var m) {
  return ad::scale(ad::sum_all(m), 1.0 / (static_cast<double>(m->rows()) * m->cols()));
}

}  // namespace

Var loss_ps(Graph& g, const posehead::PoseVars& pred, const Pose& gt,
            const SymmetryDescriptor& sym, bool sym_aware) {
  Var rot_term;
  if (sym_aware) {
    const geometry::Mat3 mask = sym.comparison_mask();
    Var pred_masked = ad::matmul(pred.rotation, g.constant(mask));
    std::vector<Var> branches;
    branches.reserve(sym.finite_rotations.size());
    for (const geometry::Mat3& rs : sym.finite_rotations) {
      Var target = g.constant(Mat(gt.rotation * rs * mask));
      branches.push_back(frobenius(ad::sub(target, pred_masked)));
    }
    rot_term = ad::select_min(branches);
  } else {
    rot_term = frobenius(ad::sub(g.constant(Mat(gt.rotation)), pred.rotation));
  }
  Var t_term = ad::row_norms(ad::sub(pred.translation, g.constant(gt.translation.transpose())));
  Var s_term = ad::row_norms(ad::sub(pred.size, g.constant(gt.size.transpose())));
  return ad::add(ad::add(rot_term, t_term), s_term);
}

Var loss_cd(Graph& g, Var p_kpt, const Mat& points) {
  if (points.rows() == 0 || p_kpt->rows() == 0)
    throw std::invalid_argument("loss_cd: empty point set");
  Var d = ad::pairwise_dist(p_kpt, g.constant(points));
  return ad::scale(ad::sum_all(ad::row_min(d)), 1.0 / p_kpt->rows());
}

Var loss_div(Graph& g, Var p_kpt, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("loss_div: threshold must be positive");
  const int n = p_kpt->rows();
  if (n < 2) throw std::invalid_argument("loss_div: needs at least two keypoints");
  Var d = ad::pairwise_dist(p_kpt, p_kpt);
  Var l = ad::add_scalar(ad::scale(ad::cmin_scalar(d, threshold), -1.0 / threshold), 1.0);
  // the diagonal contributes exactly 1 per keypoint; drop it from the mean
  Var s = ad::add_scalar(ad::sum_all(l), -static_cast<double>(n));
  return ad::scale(s, 1.0 / (static_cast<double>(n) * (n - 1)));
}

Var loss_rec(Graph& g, Var rec_points, const Mat& points) {
  if (points.rows() == 0 || rec_points->rows() == 0)
    throw std::invalid_argument("loss_rec: empty point set");
  Var d = ad::pairwise_dist(rec_points, g.constant(points));  // R x N
  Var rec_to_obs = ad::scale(ad::sum_all(ad::row_min(d)), 1.0 / rec_points->rows());
  Var obs_to_rec = ad::scale(ad::sum_all(ad::col_min(d)), 1.0 / points.rows());
  return ad::add(obs_to_rec, rec_to_obs);
}

Var loss_delta(Graph& g, Var offsets) {
  if (offsets->rows() == 0) throw std::invalid_argument("loss_delta: empty offsets");
  return ad::scale(ad::sum_all(ad::row_norms(offsets)), 1.0 / offsets->rows());
}

Var loss_nocs(Graph& g, Var nocs_pred, const Mat& target_nocs, const SymmetryDescriptor& sym) {
  const int axis = sym.infinite_axis_index();
  std::vector<Var> branches;
  branches.reserve(sym.finite_rotations.size());

  Var pred_invariant = nullptr;
  if (axis >= 0) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    Var ax = ad::slice_cols(nocs_pred, axis, 1);
    Var c1 = ad::slice_cols(nocs_pred, a1, 1);
    Var c2 = ad::slice_cols(nocs_pred, a2, 1);
    Var radius = ad::sqrt_(ad::add(ad::cmul(c1, c1), ad::cmul(c2, c2)));
    pred_invariant = ad::concat_cols(ax, radius);
  }

  for (const geometry::Mat3& rs : sym.finite_rotations) {
    const Mat target = target_nocs * rs;  // rows transformed by Rs^T
    if (axis >= 0) {
      const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
      Mat feats(target.rows(), 2);
      for (Eigen::Index i = 0; i < target.rows(); ++i) {
        feats(i, 0) = target(i, axis);
        feats(i, 1) = std::hypot(target(i, a1), target(i, a2));
      }
      Var resid = ad::sub(pred_invariant, g.constant(feats));
      branches.push_back(mean_all(ad::smooth_l1(resid, 1.0)));
    } else {
      Var resid = ad::sub(nocs_pred, g.constant(target));
      branches.push_back(mean_all(ad::smooth_l1(resid, 1.0)));
    }
  }
  return ad::select_min(branches);
}

Var loss_total(Graph& g, const LossTerms& terms, const PipelineConfig& cfg) {
  struct Entry {
    const char* name;
    Var term;
    double weight;
  };
  const Entry entries[] = {
      {"loss_ps", terms.ps, cfg.lambda1},    {"loss_cd", terms.cd, cfg.lambda2},
      {"loss_div", terms.div, cfg.lambda3},  {"loss_rec", terms.rec, cfg.lambda4},
      {"loss_delta", terms.delta, cfg.lambda5}, {"loss_nocs", terms.nocs, cfg.lambda6},
  };
  Var total = nullptr;
  for (const Entry& e : entries) {
    if (!e.term) continue;
    if (!std::isfinite(e.term->scalar()))
      throw std::runtime_error(std::string("non-finite loss component: ") + e.name);
    Var weighted = ad::scale(e.term, e.weight);
    total = total ? ad::add(total, weighted) : weighted;
  }
  if (!total) throw std::invalid_argument("loss_total: no components");
  return total;
}

}  // namespace mkpose::losses
