// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/params.hpp"

#include <stdexcept>

namespace mkpose {

int ParamStore::add(const std::string& name, Mat init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const int id = static_cast<int>(params_.size());
  quantize_f32(init);
  params_.push_back(Param{name, std::move(init), Mat(), Mat()});
  index_[name] = id;
  return id;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

Mat orthogonal_init(int rows, int cols, Rng& rng, double gain) {
  const bool wide = cols > rows;
  const int r = wide ? cols : rows;
  const int c = wide ? rows : cols;
  Mat a(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(r, c);
  Mat rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j)
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  Mat out = wide ? Mat(q.transpose()) : q;
  return gain * out;
}

Mat normal_init(int rows, int cols, Rng& rng, double stddev) {
  Mat a(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) a(i, j) = stddev * rng.normal();
  return a;
}

void quantize_f32(Mat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<double>(static_cast<float>(m(i, j)));
}

}  // namespace mkpose
