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

// Data-parallel inner loops of the regressions: weighted normal equations
// and the linear kernel matrix. `serial` is the reference implementation
// kept for testing; `parallel` is the OpenMP version used by the library.
//
// The parallel reductions split rows into fixed-size blocks and add the
// block partials in block order, so results do not depend on the thread
// count.

#ifndef PRIOCTL_KERNELS_HPP
#define PRIOCTL_KERNELS_HPP

#include "prioctl/common.hpp"

namespace prioctl::kernels {

/// Rows per reduction block in the parallel kernels.
inline constexpr Eigen::Index kBlockRows = 512;

struct NormalEquations {
  MatrixXd gram;   ///< Phi^T W Phi
  MatrixXd cross;  ///< Phi^T W U
};

namespace serial {
NormalEquations weighted_normal_equations(const MatrixXd& phi, const VectorXd& w, const MatrixXd& u);
MatrixXd linear_kernel(const MatrixXd& phi);
VectorXd column_rms(const MatrixXd& phi);
}  // namespace serial

namespace parallel {
NormalEquations weighted_normal_equations(const MatrixXd& phi, const VectorXd& w, const MatrixXd& u);
MatrixXd linear_kernel(const MatrixXd& phi);
VectorXd column_rms(const MatrixXd& phi);
}  // namespace parallel

/// Number of OpenMP threads the parallel kernels and the study use; 0 keeps
/// the OpenMP default.
void set_thread_count(int threads);
int thread_count();

}  // namespace prioctl::kernels

#endif  // PRIOCTL_KERNELS_HPP
