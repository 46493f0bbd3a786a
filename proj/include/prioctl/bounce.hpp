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

// Ball-bouncing world: closed-form ballistic flight, restitution contact on
// a racket carried by the arm, and the hitting-plane strategy that turns
// each planned hit into goals for the three task primitives.

#ifndef PRIOCTL_BOUNCE_HPP
#define PRIOCTL_BOUNCE_HPP

#include "prioctl/common.hpp"
#include "prioctl/primitives.hpp"
#include "prioctl/prioritized.hpp"
#include "prioctl/robot.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace prioctl::bounce {

inline constexpr double kGravity = 9.81;

struct BallState {
  Vector3d p = Vector3d::Zero();
  Vector3d v = Vector3d::Zero();
};

struct RacketState {
  Vector3d p = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
  Vector3d v = Vector3d::Zero();
};

struct StrategyConfig {
  double plane_height = 0.4;   ///< h_p
  double target_height = 0.9;  ///< h_t, apex of the imagined target
  Vector2d target_xy = Vector2d::Zero();
  double restitution = 0.85;
  double gravity = kGravity;
  double racket_radius = 0.08;
  /// Planned hit points farther than this from target_xy are unreachable.
  double workspace_radius = 0.3;

  /// Plane at the rest racket height, target above the rest racket center.
  static StrategyConfig for_arm(const robot::KinematicArm& arm);
  void validate() const;
};

/// Exact ballistic update.
BallState fly(const BallState& ball, double dt, double gravity = kGravity);

double apex_height(const BallState& ball, double gravity = kGravity);

/// Time until the ball passes h_p going down (the later root of the flight
/// parabola); none when that crossing lies in the past.
std::optional<double> plane_crossing_time(const BallState& ball, double h_p, double gravity = kGravity);

/// v_out = v_in - (1 + eps) ((v_in - v_r) . n) n; none for a receding contact.
std::optional<Vector3d> reflect(const Vector3d& v_in, const RacketState& racket, double restitution);

struct HitPlan {
  Vector3d hit_point = Vector3d::Zero();
  Vector3d v_in = Vector3d::Zero();
  Vector3d v_out = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
  double racket_speed = 0.0;  ///< racket velocity along the normal at contact
  double time_to_hit = 0.0;
  bool reachable = true;
};

/// Hit at the next downward plane crossing so that the ball rises to the
/// target height and comes back down through the plane above target_xy.
/// None when the ball does not reach the plane again.
std::optional<HitPlan> plan_hit(const BallState& ball, const StrategyConfig& cfg);

// ---------------------------------------------------------------------------
// Task primitives of the bouncing strategy.

struct TaskPrimitive {
  std::string name;
  robot::TaskMap map;
  primitives::MotorPrimitive dmp;
};

/// move (horizontal, standard), hit (vertical, velocity goal) and orient
/// (pitch, standard), in this index order. Forcing weights start at zero.
std::vector<TaskPrimitive> default_task_primitives(std::size_t n_basis = 10);

std::vector<prioritized::PrimitiveSpec> specs_of(const std::vector<TaskPrimitive>& prims);

inline constexpr std::size_t kMove = 0;
inline constexpr std::size_t kHit = 1;
inline constexpr std::size_t kOrient = 2;

/// Pitch goal for a racket normal, measured in the vertical plane through
/// the arm base and `hit_point`.
double pitch_for_normal(const Vector3d& normal, const Vector3d& hit_point);

// ---------------------------------------------------------------------------
// Controllers mapping primitive accelerations to joint accelerations.

class ArmController {
 public:
  virtual ~ArmController() = default;
  /// `accels` holds one task acceleration per primitive.
  virtual VectorXd control(const robot::KinematicArm& arm, const robot::ArmState& state,
                           const std::vector<VectorXd>& accels) const = 0;
};

class LearnedController final : public ArmController {
 public:
  explicit LearnedController(prioritized::PrioritizedController ctrl) : ctrl_(std::move(ctrl)) {}
  VectorXd control(const robot::KinematicArm& arm, const robot::ArmState& state,
                   const std::vector<VectorXd>& accels) const override;
  const prioritized::PrioritizedController& controller() const { return ctrl_; }

 private:
  prioritized::PrioritizedController ctrl_;
};

/// Analytic prioritized control over the primitives' task maps.
class OracleController final : public ArmController {
 public:
  OracleController(std::vector<robot::TaskMap> maps, prioritized::DominanceOrder order, learning::CostModel cost);
  VectorXd control(const robot::KinematicArm& arm, const robot::ArmState& state,
                   const std::vector<VectorXd>& accels) const override;

 private:
  std::vector<robot::TaskMap> maps_;
  prioritized::DominanceOrder order_;
  learning::CostModel cost_;
};

/// u = 0: no policies and no posture control.
class ZeroController final : public ArmController {
 public:
  VectorXd control(const robot::KinematicArm& arm, const robot::ArmState& state,
                   const std::vector<VectorXd>& accels) const override;
};

// ---------------------------------------------------------------------------
// Trials.

struct LaunchConfig {
  Vector3d offset{0.25, 0.0, 0.35};  ///< from the rest racket center
  Vector3d velocity{-0.5, 0.0, 1.0};
  // Per-axis standard deviations. The reference arm can tilt its racket only
  // within the vertical plane through its base, so lateral velocity errors
  // are uncorrectable; the default noise stays in the x-z plane.
  Vector3d position_noise{0.02, 0.0, 0.02};  ///< m
  Vector3d velocity_noise{0.05, 0.0, 0.05};  ///< m/s
  double observation_noise = 0.02;           ///< std of the planner's view of the ball, all axes
};

struct TrialConfig {
  StrategyConfig strategy;
  LaunchConfig launch;
  double dt = kDefaultDt;
  double max_time = 40.0;
  /// Shortest duration a primitive is retimed to.
  double min_duration = 0.05;
  /// Task-space feedback of the measured state onto the primitive's
  /// reference, added to its acceleration (critically damped by default).
  /// Zero runs the primitives open loop.
  double tracking_kp = 50.0;
  double tracking_kd = 2.0 * 7.0710678118654755;

  static TrialConfig for_arm(const robot::KinematicArm& arm);
  void validate() const;
};

enum class Failure { missed_ball, workspace_violation, joint_limit, timeout_success, non_finite };

std::string to_string(Failure f);
Failure failure_from_string(const std::string& s);
inline constexpr Failure kAllFailures[] = {Failure::missed_ball, Failure::workspace_violation, Failure::joint_limit,
                                           Failure::timeout_success, Failure::non_finite};

enum class EventType { launch, hit, apex, miss };
std::string to_string(EventType e);

struct Event {
  double t = 0.0;
  EventType type = EventType::launch;
  BallState ball;
  RacketState racket;
};

struct TrialLog {
  std::vector<Event> events;
  /// t, q, qd, u per control step (only filled when record_steps is set).
  bool record_steps = false;
  std::vector<double> t;
  std::vector<VectorXd> q;
  std::vector<VectorXd> qd;
  std::vector<VectorXd> u;
};

struct TrialResult {
  int hits = 0;
  Failure failure = Failure::timeout_success;
  double end_time = 0.0;
};

/// Advances the primitive by dt and returns its mean acceleration over the
/// step. Commanding this value keeps the executed task velocity on the
/// primitive's; the instantaneous value would leave an O(dt) velocity offset
/// after every retrigger, and nothing feeds it back.
VectorXd step_primitive(primitives::MotorPrimitive& dmp, double dt);

RacketState racket_state(const robot::KinematicArm& arm, const robot::ArmState& state);

/// Seeded launch state (nominal launch plus Gaussian noise).
BallState launch_ball(const robot::KinematicArm& arm, const LaunchConfig& launch, std::uint64_t seed);

/// Runs one bouncing trial from the rest posture until a miss, a failure or
/// max_time. The primitives are copied; their weights and gains are used,
/// goals and timing come from the strategy.
TrialResult run_trial(const robot::KinematicArm& arm, const ArmController& controller,
                      const std::vector<TaskPrimitive>& prims, const TrialConfig& cfg, std::uint64_t seed,
                      TrialLog* log = nullptr);

void write_event_csv(std::ostream& out, const std::vector<Event>& events);
void write_step_csv(std::ostream& out, const TrialLog& log);

void to_json(nlohmann::json& j, const StrategyConfig& c);
void from_json(const nlohmann::json& j, StrategyConfig& c);
void to_json(nlohmann::json& j, const TrialConfig& c);
/// Missing fields keep the values of `defaults`.
TrialConfig trial_config_from_json(const nlohmann::json& j, const TrialConfig& defaults);

}  // namespace prioctl::bounce

#endif  // PRIOCTL_BOUNCE_HPP
