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

// Shared test fixtures: linear (all-prismatic) arms whose task maps are
// exactly linear, and oracle-labelled datasets on them.

#ifndef PRIOCTL_TESTS_FIXTURES_HPP
#define PRIOCTL_TESTS_FIXTURES_HPP

#include "prioctl/policy.hpp"
#include "prioctl/robot.hpp"

#include <random>
#include <vector>

namespace prioctl::testing {

inline robot::KinematicArm prismatic_arm(const std::vector<Vector3d>& axes, double limit = 10.0) {
  std::vector<robot::Joint> joints;
  for (const auto& a : axes)
    joints.push_back({robot::JointType::prismatic, a.normalized(), 0.0, Vector3d::Zero(), -limit, limit});
  return robot::KinematicArm(std::move(joints), VectorXd::Zero(static_cast<Eigen::Index>(axes.size())));
}

/// Joints along x, y, the x-y diagonal and z. The x and y task rows share
/// the diagonal joint, so moving one of them disturbs the other unless the
/// controller spends effort to prevent it.
inline robot::KinematicArm coupled_arm() {
  return prismatic_arm({Vector3d::UnitX(), Vector3d::UnitY(), Vector3d(1, 1, 0), Vector3d::UnitZ()});
}

inline VectorXd gaussian(std::mt19937_64& rng, Eigen::Index n, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

/// Rows of (xdd, qd, q, u) with u from the oracle driving `map` alone at
/// random states and random desired accelerations.
inline learning::Dataset oracle_dataset(const robot::KinematicArm& arm, const robot::TaskMap& map,
                                        const learning::CostModel& cost, std::size_t rows, std::uint64_t seed,
                                        double q_sigma = 0.1, double qd_sigma = 0.3, double xdd_sigma = 2.0) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(arm.dof());
  const auto d = static_cast<Eigen::Index>(map.dim());
  learning::Dataset data(map.dim(), arm.dof(), rows);
  for (std::size_t t = 0; t < rows; ++t) {
    const VectorXd q = arm.rest_posture() + gaussian(rng, n, q_sigma);
    const VectorXd qd = gaussian(rng, n, qd_sigma);
    const VectorXd xdd = gaussian(rng, d, xdd_sigma);
    const robot::TaskCommand task{map, xdd};
    const VectorXd u = robot::oracle_control(arm, q, qd, std::span(&task, 1), cost).u;
    data.set_row(static_cast<Eigen::Index>(t), xdd, qd, q, u);
  }
  return data;
}

}  // namespace prioctl::testing

#endif  // PRIOCTL_TESTS_FIXTURES_HPP
