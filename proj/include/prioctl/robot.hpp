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

// Kinematic serial arm with acceleration-level control, task maps for the
// primitives, and the analytic prioritized operational-space controller
// used as data generator and ground truth.

#ifndef PRIOCTL_ROBOT_HPP
#define PRIOCTL_ROBOT_HPP

#include "prioctl/common.hpp"
#include "prioctl/policy.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace prioctl::robot {

enum class JointType { revolute, prismatic };

struct Joint {
  JointType type = JointType::revolute;
  Vector3d axis = Vector3d::UnitZ();  ///< in the parent frame, unit length
  double offset = 0.0;                ///< added to q before the motion is applied
  Vector3d link = Vector3d::Zero();   ///< translation after the joint motion
  double lower = -M_PI;
  double upper = M_PI;
};

/// End-effector (racket) pose. The racket normal is the local z axis.
struct Pose {
  Vector3d position = Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  Vector3d normal() const { return rotation.col(2); }
  /// Tilt of the normal towards the local forward (x) axis' horizontal
  /// direction: asin(-x_axis . z_world).
  double pitch() const;
};

/// Task-space coordinates a primitive can control.
enum class TaskCoord { x, y, z, pitch };

struct TaskMap {
  std::string name;
  std::vector<TaskCoord> coords;

  std::size_t dim() const { return coords.size(); }

  static TaskMap horizontal() { return {"horizontal", {TaskCoord::x, TaskCoord::y}}; }
  static TaskMap vertical() { return {"vertical", {TaskCoord::z}}; }
  static TaskMap pitch() { return {"pitch", {TaskCoord::pitch}}; }
  /// "horizontal", "vertical", "pitch", or a '+'-joined list such as "x+z".
  static TaskMap parse(const std::string& spec);
  std::string spec() const;
};

struct ArmState {
  VectorXd q;
  VectorXd qd;
};

class KinematicArm {
 public:
  KinematicArm() = default;
  KinematicArm(std::vector<Joint> joints, VectorXd rest_posture);

  std::size_t dof() const { return joints_.size(); }
  const std::vector<Joint>& joints() const { return joints_; }
  const VectorXd& rest_posture() const { return rest_; }
  VectorXd lower_limits() const;
  VectorXd upper_limits() const;
  bool within_limits(const VectorXd& q) const;

  Pose forward_kinematics(const VectorXd& q) const;
  VectorXd task_position(const VectorXd& q, const TaskMap& map) const;
  /// Analytic task Jacobian (dim x n).
  MatrixXd jacobian(const VectorXd& q, const TaskMap& map) const;
  /// 3 x n Jacobian of the racket center.
  MatrixXd position_jacobian(const VectorXd& q) const;
  /// Jdot*qd by a central difference of J along qd with step h.
  VectorXd jdot_qdot(const VectorXd& q, const VectorXd& qd, const TaskMap& map, double h = kDefaultDt) const;

  /// 4-DoF reference arm: base yaw, vertical lift, radial reach and wrist
  /// pitch carrying a 0.1 m racket link. At q = 0 the racket center is at
  /// (0.4 sqrt(2) + 0.1, 0, 0.4) with the normal pointing straight up.
  static KinematicArm reference();

 private:
  struct Frames {
    std::vector<Vector3d> origins;  // joint origins in world
    std::vector<Vector3d> axes;     // joint axes in world
    Pose tip;
  };
  Frames frames(const VectorXd& q) const;

  std::vector<Joint> joints_;
  VectorXd rest_;
};

void to_json(nlohmann::json& j, const KinematicArm& arm);
KinematicArm arm_from_json(const nlohmann::json& j);
KinematicArm load_arm(const std::filesystem::path& path);

/// A task in the oracle's priority list.
struct TaskCommand {
  TaskMap map;
  VectorXd xdd;  ///< desired task acceleration
};

struct OracleResult {
  VectorXd u;
  bool damped = false;  ///< the top task was rank deficient
};

/// Analytic prioritized operational-space control: the top task is met
/// exactly, each lower task within the remaining null space, and the
/// residual freedom stays on u0. Among those solutions (u - u0)^T N (u - u0)
/// is minimal. `tasks` is ordered lowest priority first.
OracleResult oracle_control(const KinematicArm& arm, const VectorXd& q, const VectorXd& qd,
                            std::span<const TaskCommand> tasks, const learning::CostModel& cost);

enum class StepStatus { ok, joint_limit, non_finite };

/// Semi-implicit Euler: qd += u dt, then q += qd dt.
StepStatus step_dynamics(const KinematicArm& arm, ArmState& state, const VectorXd& u, double dt);

/// Numeric inverse kinematics of a task map by damped Gauss-Newton from q0.
/// Returns the final joint vector; `converged` reports success.
VectorXd inverse_kinematics(const KinematicArm& arm, const TaskMap& map, const VectorXd& target, VectorXd q0,
                            bool* converged = nullptr);

}  // namespace prioctl::robot

#endif  // PRIOCTL_ROBOT_HPP
