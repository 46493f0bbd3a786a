// Copyright 2026 The prioctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prioctl/kernels.hpp"

#include <omp.h>

#include <vector>

namespace prioctl::kernels {

namespace {

void check_shapes(const MatrixXd& phi, const VectorXd& w, const MatrixXd& u) {
  require(w.size() == phi.rows() && u.rows() == phi.rows(), "normal equations: row counts differ");
}

}  // namespace

namespace serial {

NormalEquations weighted_normal_equations(const MatrixXd& phi, const VectorXd& w, const MatrixXd& u) {
  check_shapes(phi, w, u);
  const auto p = phi.cols();
  NormalEquations ne{MatrixXd::Zero(p, p), MatrixXd::Zero(p, u.cols())};
  for (Eigen::Index t = 0; t < phi.rows(); ++t) {
    for (Eigen::Index a = 0; a < p; ++a) {
      const double wa = w(t) * phi(t, a);
      for (Eigen::Index b = 0; b < p; ++b) ne.gram(a, b) += wa * phi(t, b);
      for (Eigen::Index c = 0; c < u.cols(); ++c) ne.cross(a, c) += wa * u(t, c);
    }
  }
  return ne;
}

MatrixXd linear_kernel(const MatrixXd& phi) {
  const auto n = phi.rows();
  MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < phi.cols(); ++c) s += phi(i, c) * phi(j, c);
      k(i, j) = s;
      k(j, i) = s;
    }
  return k;
}

VectorXd column_rms(const MatrixXd& phi) {
  VectorXd rms = VectorXd::Zero(phi.cols());
  if (phi.rows() == 0) return rms;
  for (Eigen::Index t = 0; t < phi.rows(); ++t)
    for (Eigen::Index c = 0; c < phi.cols(); ++c) rms(c) += phi(t, c) * phi(t, c);
  return (rms / static_cast<double>(phi.rows())).cwiseSqrt();
}

}  // namespace serial

namespace parallel {

NormalEquations weighted_normal_equations(const MatrixXd& phi, const VectorXd& w, const MatrixXd& u) {
  check_shapes(phi, w, u);
  const auto rows = phi.rows();
  const auto p = phi.cols();
  const Eigen::Index blocks = (rows + kBlockRows - 1) / kBlockRows;
  std::vector<NormalEquations> partial(static_cast<std::size_t>(blocks));

#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index begin = b * kBlockRows;
    const Eigen::Index count = std::min(kBlockRows, rows - begin);
    const auto block = phi.middleRows(begin, count);
    const MatrixXd weighted = w.segment(begin, count).asDiagonal() * block;
    auto& out = partial[static_cast<std::size_t>(b)];
    out.gram.noalias() = weighted.transpose() * block;
    out.cross.noalias() = weighted.transpose() * u.middleRows(begin, count);
  }

  NormalEquations ne{MatrixXd::Zero(p, p), MatrixXd::Zero(p, u.cols())};
  for (const auto& part : partial) {
    ne.gram += part.gram;
    ne.cross += part.cross;
  }
  return ne;
}

MatrixXd linear_kernel(const MatrixXd& phi) {
  const auto n = phi.rows();
  MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) k.row(i).noalias() = phi.row(i) * phi.transpose();
  // Enforce exact symmetry so the Cholesky factorization sees a symmetric
  // matrix regardless of summation order.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) k(j, i) = k(i, j);
  return k;
}

VectorXd column_rms(const MatrixXd& phi) {
  const auto rows = phi.rows();
  if (rows == 0) return VectorXd::Zero(phi.cols());
  const Eigen::Index blocks = (rows + kBlockRows - 1) / kBlockRows;
  std::vector<VectorXd> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index begin = b * kBlockRows;
    const Eigen::Index count = std::min(kBlockRows, rows - begin);
    partial[static_cast<std::size_t>(b)] = phi.middleRows(begin, count).array().square().colwise().sum().transpose();
  }
  VectorXd sum = VectorXd::Zero(phi.cols());
  for (const auto& part : partial) sum += part;
  return (sum / static_cast<double>(rows)).cwiseSqrt();
}

}  // namespace parallel

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace prioctl::kernels
