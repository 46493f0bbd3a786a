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

#include <gtest/gtest.h>

#include <random>

using namespace prioctl;

namespace {

MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

double rel_diff(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

class ThreadScope {
 public:
  explicit ThreadScope(int n) : saved_(kernels::thread_count()) { kernels::set_thread_count(n); }
  ~ThreadScope() { kernels::set_thread_count(saved_); }

 private:
  int saved_;
};

}  // namespace

TEST(Kernels, ParallelNormalEquationsMatchSerial) {
  std::mt19937_64 rng(1);
  for (Eigen::Index rows : {1, 7, 511, 512, 513, 3000}) {
    const MatrixXd phi = random_matrix(rng, rows, 9);
    const MatrixXd u = random_matrix(rng, rows, 4);
    const VectorXd w = random_matrix(rng, rows, 1).cwiseAbs();
    const auto s = kernels::serial::weighted_normal_equations(phi, w, u);
    const auto p = kernels::parallel::weighted_normal_equations(phi, w, u);
    EXPECT_LT(rel_diff(p.gram, s.gram), 1e-13) << rows;
    EXPECT_LT(rel_diff(p.cross, s.cross), 1e-13) << rows;
  }
}

TEST(Kernels, NormalEquationsMatchDenseAlgebra) {
  std::mt19937_64 rng(2);
  const MatrixXd phi = random_matrix(rng, 200, 5);
  const MatrixXd u = random_matrix(rng, 200, 3);
  const VectorXd w = random_matrix(rng, 200, 1).cwiseAbs();
  const auto s = kernels::serial::weighted_normal_equations(phi, w, u);
  EXPECT_LT(rel_diff(s.gram, phi.transpose() * w.asDiagonal() * phi), 1e-13);
  EXPECT_LT(rel_diff(s.cross, phi.transpose() * w.asDiagonal() * u), 1e-13);
}

TEST(Kernels, ParallelKernelMatrixMatchesSerial) {
  std::mt19937_64 rng(3);
  const MatrixXd phi = random_matrix(rng, 300, 6);
  const MatrixXd s = kernels::serial::linear_kernel(phi);
  const MatrixXd p = kernels::parallel::linear_kernel(phi);
  EXPECT_LT(rel_diff(p, s), 1e-13);
  EXPECT_EQ(p, p.transpose());
}

TEST(Kernels, ColumnRmsMatchesSerial) {
  std::mt19937_64 rng(4);
  const MatrixXd phi = random_matrix(rng, 1200, 7);
  EXPECT_LT(rel_diff(kernels::parallel::column_rms(phi), kernels::serial::column_rms(phi)), 1e-14);
  EXPECT_EQ(kernels::parallel::column_rms(MatrixXd(0, 3)), VectorXd::Zero(3));
}

TEST(Kernels, ResultsIndependentOfThreadCount) {
  std::mt19937_64 rng(5);
  const MatrixXd phi = random_matrix(rng, 5000, 10);
  const MatrixXd u = random_matrix(rng, 5000, 4);
  const VectorXd w = random_matrix(rng, 5000, 1).cwiseAbs();
  kernels::NormalEquations one, many;
  {
    ThreadScope scope(1);
    one = kernels::parallel::weighted_normal_equations(phi, w, u);
  }
  {
    ThreadScope scope(4);
    many = kernels::parallel::weighted_normal_equations(phi, w, u);
  }
  EXPECT_EQ(one.gram, many.gram);
  EXPECT_EQ(one.cross, many.cross);
}

TEST(Kernels, RowCountMismatchRejected) {
  EXPECT_THROW(kernels::parallel::weighted_normal_equations(MatrixXd::Zero(3, 2), VectorXd::Ones(2),
                                                            MatrixXd::Zero(3, 1)),
               InvalidArgument);
}
