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

// Discrete dynamical-systems motor primitives driven by a first-order
// canonical phase. Each primitive emits task-space accelerations; several
// primitives share one phase when they are triggered together.

#ifndef PRIOCTL_PRIMITIVES_HPP
#define PRIOCTL_PRIMITIVES_HPP

#include "prioctl/common.hpp"

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace prioctl::primitives {

/// ln(100): the phase decays to 0.01 at the end of the movement.
inline const double kDefaultAlphaZ = std::log(100.0);
inline constexpr double kDefaultAlphaY = 25.0;

struct CanonicalSystem {
  double z = 1.0;
  double tau = 1.0;  ///< 1/T, T the movement duration in seconds.
  double alpha_z = kDefaultAlphaZ;
};

/// Advances the phase by the exact solution of dz/dt = -tau*alpha_z*z.
/// A zero step is the identity; negative steps are rejected.
CanonicalSystem step_canonical(const CanonicalSystem& cs, double dt);

/// z(t) for a system started at z = 1.
inline double phase_at(double tau, double alpha_z, double t) {
  return std::exp(-tau * alpha_z * t);
}

/// Normalized Gaussian kernels over the phase.
struct BasisSet {
  VectorXd centers;
  VectorXd widths;

  std::size_t size() const { return static_cast<std::size_t>(centers.size()); }

  /// Centers equally spaced in time over [0, T] (hence exponentially spaced
  /// in phase), widths 1/(c_{i+1}-c_i)^2 with the last width repeated.
  static BasisSet spaced_in_time(std::size_t count, double alpha_z = kDefaultAlphaZ);
};

/// psi_i(z); non-negative and summing to one.
VectorXd basis_activations(const BasisSet& basis, double z);

enum class PrimitiveMode { standard, velocity_goal };

std::string to_string(PrimitiveMode mode);
PrimitiveMode primitive_mode_from_string(const std::string& name);

/// One sample of a task-space trajectory.
struct TaskSample {
  double t = 0.0;
  VectorXd x;
  VectorXd xd;
  VectorXd xdd;
};

struct TaskTrajectory {
  std::vector<TaskSample> samples;

  std::size_t dof() const { return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().x.size()); }
  double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }

  /// Throws InvalidArgument unless timestamps increase strictly, every vector
  /// has the same dimension and all values are finite.
  void validate() const;
};

/// CSV with header t,x0..,xd0..,xdd0..
void write_trajectory_csv(std::ostream& out, const TaskTrajectory& traj);
TaskTrajectory read_trajectory_csv(std::istream& in);

class MotorPrimitive {
 public:
  MotorPrimitive() = default;
  MotorPrimitive(std::size_t dof, BasisSet basis, PrimitiveMode mode = PrimitiveMode::standard);

  std::size_t dof() const { return dof_; }
  PrimitiveMode mode() const { return mode_; }
  const BasisSet& basis() const { return basis_; }

  // Parameters. Weights are n_basis x dof.
  MatrixXd weights;
  VectorXd goal;
  VectorXd goal_velocity;
  VectorXd amplitude;
  double tau = 1.0;
  double alpha_y = kDefaultAlphaY;
  double beta_y = kDefaultAlphaY / 4.0;
  double alpha_z = kDefaultAlphaZ;
  double alpha_h = kDefaultAlphaZ;

  /// Starts a movement from (x, xd) towards the current goal: z = 1,
  /// amplitude = goal - x (1 where that is below 1e-6 in magnitude).
  void reset(const VectorXd& x, const VectorXd& xd);

  /// Re-targets and re-times the primitive, then calls reset(). The duration
  /// sets tau = 1/duration.
  void retrigger(const VectorXd& new_goal, const VectorXd& new_goal_velocity, double duration,
                 const VectorXd& x, const VectorXd& xd);

  /// f(z) = sum_i psi_i(z) w_i z, one entry per degree of freedom.
  VectorXd forcing(double z) const;

  /// Moving goal of the velocity-goal form; equals goal in standard mode.
  VectorXd moving_goal(double z) const;

  /// Task acceleration at an arbitrary state and phase.
  VectorXd acceleration(const VectorXd& x, const VectorXd& xd, double z) const;

  /// One RK4 step of the internal state; the phase is integrated exactly.
  /// Returns the sample at the end of the step (its t is the accumulated
  /// time since reset). Throws NumericalError on non-finite state.
  TaskSample step(double dt);

  double phase() const { return z_; }
  double elapsed() const { return t_; }
  VectorXd position() const { return y1_; }
  VectorXd velocity() const { return tau * y2_; }
  /// Acceleration at the current internal state.
  VectorXd current_acceleration() const { return acceleration(y1_, tau * y2_, z_); }

  /// Check of the shape invariants; throws InvalidArgument.
  void validate() const;

 private:
  // dy2/dt for the internal (y1, y2) coordinates.
  VectorXd y2_rate(const VectorXd& y1, const VectorXd& y2, double z) const;

  std::size_t dof_ = 0;
  BasisSet basis_;
  PrimitiveMode mode_ = PrimitiveMode::standard;

  VectorXd y1_;
  VectorXd y2_;
  VectorXd moving_goal_start_;
  double z_ = 1.0;
  double t_ = 0.0;
};

struct ImitationOptions {
  double ridge = 1e-8;
  double alpha_y = kDefaultAlphaY;
  double alpha_z = kDefaultAlphaZ;
};

/// Learns a primitive from one demonstration by per-basis locally weighted
/// regression on the forcing values that reproduce the demonstrated
/// accelerations. The returned primitive is reset to the demo's first sample.
MotorPrimitive imitate(const TaskTrajectory& demo, std::size_t n_basis, PrimitiveMode mode,
                       const ImitationOptions& options = {});

/// Integrates a freshly reset copy of the primitive over the demo's sample
/// times and returns the replayed trajectory.
TaskTrajectory replay(MotorPrimitive primitive, const TaskTrajectory& reference, double dt = kDefaultDt);

void to_json(nlohmann::json& j, const MotorPrimitive& mp);
void from_json(const nlohmann::json& j, MotorPrimitive& mp);

}  // namespace prioctl::primitives

#endif  // PRIOCTL_PRIMITIVES_HPP
