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

#include "prioctl/robot.hpp"

#include "prioctl/io.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace prioctl::robot {

namespace {

constexpr double kRankTolerance = 1e-9;
constexpr double kTopTaskDamping = 1e-4;

MatrixXd pseudo_inverse(const MatrixXd& m, double rel_tol, std::size_t* rank = nullptr) {
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = rel_tol * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  VectorXd inv = VectorXd::Zero(s.size());
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) {
      inv(i) = 1.0 / s(i);
      ++r;
    }
  if (rank) *rank = r;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd damped_inverse(const MatrixXd& m, double damping) {
  const MatrixXd mmt = m * m.transpose() + damping * damping * MatrixXd::Identity(m.rows(), m.rows());
  return m.transpose() * mmt.ldlt().solve(MatrixXd::Identity(m.rows(), m.rows()));
}

// N^{-1/2}; a semi-definite metric is regularized so that the minimum-cost
// solution stays unique.
MatrixXd inverse_sqrt_metric(const MatrixXd& metric) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(metric);
  VectorXd values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = 1.0 / std::sqrt(std::max(values(i), 1e-9));
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

Vector3d axis_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const bool negative = !s.empty() && s.front() == '-';
    const std::string name = negative ? s.substr(1) : s;
    Vector3d a;
    if (name == "x") a = Vector3d::UnitX();
    else if (name == "y") a = Vector3d::UnitY();
    else if (name == "z") a = Vector3d::UnitZ();
    else throw InvalidArgument("unknown joint axis '" + s + "'");
    return negative ? Vector3d(-a) : a;
  }
  const auto v = io::vector_from_json(j);
  require(v.size() == 3 && v.norm() > 0.0, "joint axis must be a non-zero 3-vector");
  return v.normalized();
}

}  // namespace

double Pose::pitch() const {
  const double s = std::clamp(-rotation.col(0).z(), -1.0, 1.0);
  return std::asin(s);
}

TaskMap TaskMap::parse(const std::string& spec) {
  if (spec == "horizontal") return horizontal();
  if (spec == "vertical") return vertical();
  if (spec == "pitch") return pitch();
  TaskMap map{spec, {}};
  for (const auto& part : io::split(spec, '+')) {
    if (part == "x") map.coords.push_back(TaskCoord::x);
    else if (part == "y") map.coords.push_back(TaskCoord::y);
    else if (part == "z") map.coords.push_back(TaskCoord::z);
    else if (part == "pitch") map.coords.push_back(TaskCoord::pitch);
    else throw InvalidArgument("unknown task coordinate '" + part + "'");
  }
  return map;
}

std::string TaskMap::spec() const {
  if (name == "horizontal" || name == "vertical" || name == "pitch") return name;
  std::string out;
  for (auto c : coords) {
    if (!out.empty()) out += '+';
    out += c == TaskCoord::x ? "x" : c == TaskCoord::y ? "y" : c == TaskCoord::z ? "z" : "pitch";
  }
  return out;
}

KinematicArm::KinematicArm(std::vector<Joint> joints, VectorXd rest_posture)
    : joints_(std::move(joints)), rest_(std::move(rest_posture)) {
  require(!joints_.empty(), "arm needs at least one joint");
  require(rest_.size() == static_cast<Eigen::Index>(joints_.size()), "rest posture length must equal joint count");
  for (auto& j : joints_) {
    require(j.axis.norm() > 0.0, "joint axis must be non-zero");
    j.axis.normalize();
    require(j.lower < j.upper, "joint limits must satisfy lower < upper");
  }
}

VectorXd KinematicArm::lower_limits() const {
  VectorXd v(static_cast<Eigen::Index>(dof()));
  for (std::size_t i = 0; i < dof(); ++i) v(static_cast<Eigen::Index>(i)) = joints_[i].lower;
  return v;
}

VectorXd KinematicArm::upper_limits() const {
  VectorXd v(static_cast<Eigen::Index>(dof()));
  for (std::size_t i = 0; i < dof(); ++i) v(static_cast<Eigen::Index>(i)) = joints_[i].upper;
  return v;
}

bool KinematicArm::within_limits(const VectorXd& q) const {
  for (std::size_t i = 0; i < dof(); ++i) {
    const double v = q(static_cast<Eigen::Index>(i));
    if (v < joints_[i].lower || v > joints_[i].upper) return false;
  }
  return true;
}

KinematicArm::Frames KinematicArm::frames(const VectorXd& q) const {
  require(q.size() == static_cast<Eigen::Index>(dof()), "joint vector length does not match the arm");
  Frames f;
  f.origins.reserve(dof());
  f.axes.reserve(dof());
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Vector3d pos = Vector3d::Zero();
  for (std::size_t i = 0; i < dof(); ++i) {
    const auto& joint = joints_[i];
    const double value = q(static_cast<Eigen::Index>(i)) + joint.offset;
    f.origins.push_back(pos);
    f.axes.push_back(rot * joint.axis);
    if (joint.type == JointType::revolute) rot = rot * Eigen::AngleAxisd(value, joint.axis).toRotationMatrix();
    else pos += rot * joint.axis * value;
    pos += rot * joint.link;
  }
  f.tip.position = pos;
  f.tip.rotation = rot;
  return f;
}

Pose KinematicArm::forward_kinematics(const VectorXd& q) const { return frames(q).tip; }

VectorXd KinematicArm::task_position(const VectorXd& q, const TaskMap& map) const {
  const Pose pose = forward_kinematics(q);
  VectorXd x(static_cast<Eigen::Index>(map.dim()));
  for (std::size_t r = 0; r < map.dim(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    switch (map.coords[r]) {
      case TaskCoord::x: x(row) = pose.position.x(); break;
      case TaskCoord::y: x(row) = pose.position.y(); break;
      case TaskCoord::z: x(row) = pose.position.z(); break;
      case TaskCoord::pitch: x(row) = pose.pitch(); break;
    }
  }
  return x;
}

MatrixXd KinematicArm::position_jacobian(const VectorXd& q) const {
  const Frames f = frames(q);
  MatrixXd jac(3, static_cast<Eigen::Index>(dof()));
  for (std::size_t k = 0; k < dof(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    if (joints_[k].type == JointType::revolute) jac.col(col) = f.axes[k].cross(f.tip.position - f.origins[k]);
    else jac.col(col) = f.axes[k];
  }
  return jac;
}

MatrixXd KinematicArm::jacobian(const VectorXd& q, const TaskMap& map) const {
  const Frames f = frames(q);
  const Vector3d forward = f.tip.rotation.col(0);
  const double cos_pitch = std::sqrt(std::max(1e-12, 1.0 - forward.z() * forward.z()));
  MatrixXd jac(static_cast<Eigen::Index>(map.dim()), static_cast<Eigen::Index>(dof()));
  for (std::size_t k = 0; k < dof(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const bool revolute = joints_[k].type == JointType::revolute;
    const Vector3d linear = revolute ? Vector3d(f.axes[k].cross(f.tip.position - f.origins[k])) : f.axes[k];
    for (std::size_t r = 0; r < map.dim(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      switch (map.coords[r]) {
        case TaskCoord::x: jac(row, col) = linear.x(); break;
        case TaskCoord::y: jac(row, col) = linear.y(); break;
        case TaskCoord::z: jac(row, col) = linear.z(); break;
        case TaskCoord::pitch:
          jac(row, col) = revolute ? -f.axes[k].cross(forward).z() / cos_pitch : 0.0;
          break;
      }
    }
  }
  return jac;
}

VectorXd KinematicArm::jdot_qdot(const VectorXd& q, const VectorXd& qd, const TaskMap& map, double h) const {
  require(h > 0.0, "jdot_qdot: step must be positive");
  const MatrixXd ahead = jacobian(q + h * qd, map);
  const MatrixXd behind = jacobian(q - h * qd, map);
  return (ahead - behind) * qd / (2.0 * h);
}

KinematicArm KinematicArm::reference() {
  std::vector<Joint> joints{
      {JointType::revolute, Vector3d::UnitZ(), 0.0, Vector3d::Zero(), -1.5, 1.5},
      {JointType::prismatic, Vector3d::UnitZ(), 0.4, Vector3d::Zero(), -0.3, 0.3},
      {JointType::prismatic, Vector3d::UnitX(), 0.4 * std::sqrt(2.0), Vector3d::Zero(), -0.3, 0.3},
      {JointType::revolute, -Vector3d::UnitY(), 0.0, Vector3d(0.1, 0.0, 0.0), -1.2, 1.2},
  };
  return KinematicArm(std::move(joints), VectorXd::Zero(4));
}

void to_json(nlohmann::json& j, const KinematicArm& arm) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& joint : arm.joints()) {
    nlohmann::json jj{{"type", joint.type == JointType::revolute ? "revolute" : "prismatic"},
                      {"axis", io::to_json(VectorXd(joint.axis))},
                      {"offset", joint.offset},
                      {"limits", {joint.lower, joint.upper}}};
    if (joint.link.y() == 0.0 && joint.link.z() == 0.0) jj["length"] = joint.link.x();
    else jj["link"] = io::to_json(VectorXd(joint.link));
    joints.push_back(jj);
  }
  j = nlohmann::json{{"joints", joints}, {"rest_posture", io::to_json(arm.rest_posture())}};
}

KinematicArm arm_from_json(const nlohmann::json& j) {
  try {
    std::vector<Joint> joints;
    for (const auto& jj : j.at("joints")) {
      Joint joint;
      const auto type = jj.value("type", std::string("revolute"));
      require(type == "revolute" || type == "prismatic", "joint type must be revolute or prismatic");
      joint.type = type == "revolute" ? JointType::revolute : JointType::prismatic;
      joint.axis = axis_from_json(jj.at("axis"));
      joint.offset = jj.value("offset", 0.0);
      if (jj.contains("link")) {
        const auto link = io::vector_from_json(jj.at("link"));
        require(link.size() == 3, "joint link must be a 3-vector");
        joint.link = link;
      } else {
        joint.link = Vector3d(jj.value("length", 0.0), 0.0, 0.0);
      }
      const auto limits = jj.at("limits").get<std::vector<double>>();
      require(limits.size() == 2, "joint limits must be [lower, upper]");
      joint.lower = limits[0];
      joint.upper = limits[1];
      joints.push_back(joint);
    }
    VectorXd rest = j.contains("rest_posture") ? io::vector_from_json(j.at("rest_posture"))
                                               : VectorXd::Zero(static_cast<Eigen::Index>(joints.size()));
    return KinematicArm(std::move(joints), std::move(rest));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("arm description: ") + e.what());
  }
}

KinematicArm load_arm(const std::filesystem::path& path) { return arm_from_json(io::read_json_file(path)); }

OracleResult oracle_control(const KinematicArm& arm, const VectorXd& q, const VectorXd& qd,
                            std::span<const TaskCommand> tasks, const learning::CostModel& cost) {
  const auto n = static_cast<Eigen::Index>(arm.dof());
  require(q.size() == n && qd.size() == n, "oracle_control: state size mismatch");
  require(cost.joints() == arm.dof(), "oracle_control: cost model joint count mismatch");

  OracleResult result;
  const VectorXd u0 = cost.null_space_control(q, qd);
  // Work in v = N^{1/2} (u - u0), where the metric becomes Euclidean.
  const MatrixXd metric_isqrt = inverse_sqrt_metric(cost.metric);
  VectorXd v = VectorXd::Zero(n);
  MatrixXd projector = MatrixXd::Identity(n, n);

  for (std::size_t k = tasks.size(); k-- > 0;) {
    const auto& task = tasks[k];
    require(task.xdd.size() == static_cast<Eigen::Index>(task.map.dim()), "oracle_control: task acceleration size mismatch");
    const MatrixXd jac = arm.jacobian(q, task.map);
    const VectorXd residual = task.xdd - arm.jdot_qdot(q, qd, task.map) - jac * u0;
    const MatrixXd a = jac * metric_isqrt;
    const MatrixXd ap = a * projector;
    MatrixXd ap_inv;
    if (k + 1 == tasks.size()) {
      std::size_t rank = 0;
      ap_inv = pseudo_inverse(ap, kRankTolerance, &rank);
      if (rank < static_cast<std::size_t>(ap.rows())) {
        ap_inv = damped_inverse(ap, kTopTaskDamping);
        result.damped = true;
      }
    } else {
      ap_inv = pseudo_inverse(ap, kRankTolerance);
    }
    v += ap_inv * (residual - a * v);
    projector -= ap_inv * ap;
  }
  result.u = u0 + metric_isqrt * v;
  return result;
}

StepStatus step_dynamics(const KinematicArm& arm, ArmState& state, const VectorXd& u, double dt) {
  require(dt > 0.0, "step_dynamics: dt must be positive");
  require(u.size() == state.q.size() && state.q.size() == static_cast<Eigen::Index>(arm.dof()),
          "step_dynamics: size mismatch");
  if (!u.allFinite()) return StepStatus::non_finite;
  state.qd += u * dt;
  state.q += state.qd * dt;
  if (!state.q.allFinite() || !state.qd.allFinite()) return StepStatus::non_finite;
  return arm.within_limits(state.q) ? StepStatus::ok : StepStatus::joint_limit;
}

VectorXd inverse_kinematics(const KinematicArm& arm, const TaskMap& map, const VectorXd& target, VectorXd q0,
                            bool* converged) {
  require(target.size() == static_cast<Eigen::Index>(map.dim()), "inverse_kinematics: target size mismatch");
  bool ok = false;
  for (int iter = 0; iter < 500; ++iter) {
    const VectorXd err = target - arm.task_position(q0, map);
    if (err.norm() < 1e-12) {
      ok = true;
      break;
    }
    q0 += damped_inverse(arm.jacobian(q0, map), 1e-6) * err;
  }
  if (!ok) ok = (target - arm.task_position(q0, map)).norm() < 1e-10;
  if (converged) *converged = ok;
  return q0;
}

}  // namespace prioctl::robot
