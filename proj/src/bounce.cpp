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

#include "prioctl/bounce.hpp"

#include "prioctl/io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

namespace prioctl::bounce {

namespace {

// Below this the racket normal is considered too flat to drive the hit
// primitive through its vertical coordinate.
constexpr double kMinNormalZ = 0.2;

// Draws all three axes even when a sigma is zero so that the stream position
// does not depend on which axes are noisy.
Vector3d gaussian3(std::mt19937_64& rng, const Vector3d& sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return Vector3d(x, y, z).cwiseProduct(sigma);
}

Vector3d gaussian3(std::mt19937_64& rng, double sigma) { return gaussian3(rng, Vector3d::Constant(sigma)); }

void write_vec(std::ostream& out, const Vector3d& v) {
  for (int i = 0; i < 3; ++i) out << ',' << io::format_double(v(i));
}

nlohmann::json vec3_json(const Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Vector3d vec3_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  require(v.size() == 3, "expected a 3-vector");
  return {v[0], v[1], v[2]};
}

// A scalar applies to every axis.
Vector3d noise_from(const nlohmann::json& j) {
  return j.is_number() ? Vector3d::Constant(j.get<double>()) : vec3_from(j);
}

}  // namespace

StrategyConfig StrategyConfig::for_arm(const robot::KinematicArm& arm) {
  const auto pose = arm.forward_kinematics(arm.rest_posture());
  StrategyConfig c;
  c.plane_height = pose.position.z();
  c.target_height = c.plane_height + 0.5;
  c.target_xy = pose.position.head<2>();
  return c;
}

void StrategyConfig::validate() const {
  require(std::isfinite(plane_height) && std::isfinite(target_height), "strategy heights must be finite");
  require(target_height > plane_height, "target height must lie above the hitting plane");
  require(restitution > 0.0 && restitution <= 1.0, "restitution must lie in (0, 1]");
  require(gravity > 0.0, "gravity must be positive");
  require(racket_radius > 0.0, "racket radius must be positive");
  require(workspace_radius > 0.0, "workspace radius must be positive");
  require(target_xy.allFinite(), "target position must be finite");
}

BallState fly(const BallState& ball, double dt, double gravity) {
  require(dt >= 0.0, "fly: dt must be non-negative");
  BallState out;
  out.p = ball.p + ball.v * dt;
  out.p.z() -= 0.5 * gravity * dt * dt;
  out.v = ball.v;
  out.v.z() -= gravity * dt;
  return out;
}

double apex_height(const BallState& ball, double gravity) {
  const double up = std::max(0.0, ball.v.z());
  return ball.p.z() + up * up / (2.0 * gravity);
}

std::optional<double> plane_crossing_time(const BallState& ball, double h_p, double gravity) {
  // p_z + v_z t - g t^2 / 2 = h_p
  const double vz = ball.v.z();
  const double dz = ball.p.z() - h_p;
  const double disc = vz * vz + 2.0 * gravity * dz;
  if (disc < 0.0) return std::nullopt;
  const double root = (vz + std::sqrt(disc)) / gravity;
  if (root < 0.0) return std::nullopt;
  return root;
}

std::optional<Vector3d> reflect(const Vector3d& v_in, const RacketState& racket, double restitution) {
  const double approach = (v_in - racket.v).dot(racket.normal);
  if (!(approach < 0.0)) return std::nullopt;
  return Vector3d(v_in - (1.0 + restitution) * approach * racket.normal);
}

std::optional<HitPlan> plan_hit(const BallState& ball, const StrategyConfig& cfg) {
  const auto t_hit = plane_crossing_time(ball, cfg.plane_height, cfg.gravity);
  if (!t_hit) return std::nullopt;
  const BallState at = fly(ball, *t_hit, cfg.gravity);
  HitPlan plan;
  plan.time_to_hit = *t_hit;
  plan.hit_point = at.p;
  plan.hit_point.z() = cfg.plane_height;
  plan.v_in = at.v;

  const double vz = std::sqrt(2.0 * cfg.gravity * (cfg.target_height - cfg.plane_height));
  const double flight = 2.0 * vz / cfg.gravity;
  const Vector2d vxy = (cfg.target_xy - plan.hit_point.head<2>()) / flight;
  plan.v_out = Vector3d(vxy.x(), vxy.y(), vz);

  const Vector3d dv = plan.v_out - plan.v_in;
  plan.normal = dv.norm() > 0.0 ? Vector3d(dv.normalized()) : Vector3d::UnitZ();
  const double eps = cfg.restitution;
  plan.racket_speed = (plan.v_out.dot(plan.normal) + eps * plan.v_in.dot(plan.normal)) / (1.0 + eps);
  plan.reachable = (plan.hit_point.head<2>() - cfg.target_xy).norm() <= cfg.workspace_radius;
  return plan;
}

std::vector<TaskPrimitive> default_task_primitives(std::size_t n_basis) {
  const auto basis = primitives::BasisSet::spaced_in_time(n_basis);
  auto make = [&](std::string name, robot::TaskMap map, primitives::PrimitiveMode mode) {
    primitives::MotorPrimitive dmp(map.dim(), basis, mode);
    return TaskPrimitive{std::move(name), std::move(map), std::move(dmp)};
  };
  return {make("move", robot::TaskMap::horizontal(), primitives::PrimitiveMode::standard),
          make("hit", robot::TaskMap::vertical(), primitives::PrimitiveMode::velocity_goal),
          make("orient", robot::TaskMap::pitch(), primitives::PrimitiveMode::standard)};
}

std::vector<prioritized::PrimitiveSpec> specs_of(const std::vector<TaskPrimitive>& prims) {
  std::vector<prioritized::PrimitiveSpec> out;
  for (const auto& p : prims) out.push_back({p.name, p.map.dim()});
  return out;
}

double pitch_for_normal(const Vector3d& normal, const Vector3d& hit_point) {
  Vector3d forward(hit_point.x(), hit_point.y(), 0.0);
  forward = forward.norm() > 1e-9 ? Vector3d(forward.normalized()) : Vector3d::UnitX();
  return std::atan2(normal.dot(forward), normal.z());
}

VectorXd LearnedController::control(const robot::KinematicArm&, const robot::ArmState& state,
                                    const std::vector<VectorXd>& accels) const {
  return ctrl_.predict_control(state.q, state.qd, accels);
}

OracleController::OracleController(std::vector<robot::TaskMap> maps, prioritized::DominanceOrder order,
                                   learning::CostModel cost)
    : maps_(std::move(maps)), order_(std::move(order)), cost_(std::move(cost)) {
  order_.validate(maps_.size());
}

VectorXd OracleController::control(const robot::KinematicArm& arm, const robot::ArmState& state,
                                   const std::vector<VectorXd>& accels) const {
  std::vector<robot::TaskCommand> tasks;
  tasks.reserve(maps_.size());
  for (auto k : order_.ordering) tasks.push_back({maps_[k], accels.at(k)});
  return robot::oracle_control(arm, state.q, state.qd, tasks, cost_).u;
}

VectorXd ZeroController::control(const robot::KinematicArm& arm, const robot::ArmState&,
                                 const std::vector<VectorXd>&) const {
  return VectorXd::Zero(static_cast<Eigen::Index>(arm.dof()));
}

TrialConfig TrialConfig::for_arm(const robot::KinematicArm& arm) {
  TrialConfig c;
  c.strategy = StrategyConfig::for_arm(arm);
  return c;
}

void TrialConfig::validate() const {
  strategy.validate();
  require(dt > 0.0 && std::isfinite(dt), "trial dt must be positive");
  require(max_time > 0.0, "trial max_time must be positive");
  require(min_duration > 0.0, "minimum primitive duration must be positive");
  require(tracking_kp >= 0.0 && tracking_kd >= 0.0, "tracking gains must be non-negative");
  require(launch.position_noise.minCoeff() >= 0.0 && launch.velocity_noise.minCoeff() >= 0.0 &&
              launch.observation_noise >= 0.0,
          "noise levels must be non-negative");
}

std::string to_string(Failure f) {
  switch (f) {
    case Failure::missed_ball: return "missed-ball";
    case Failure::workspace_violation: return "workspace-violation";
    case Failure::joint_limit: return "joint-limit";
    case Failure::timeout_success: return "timeout-success";
    case Failure::non_finite: return "non-finite";
  }
  return "unknown";
}

Failure failure_from_string(const std::string& s) {
  for (auto f : kAllFailures)
    if (to_string(f) == s) return f;
  throw InvalidArgument("unknown failure reason '" + s + "'");
}

std::string to_string(EventType e) {
  switch (e) {
    case EventType::launch: return "launch";
    case EventType::hit: return "hit";
    case EventType::apex: return "apex";
    case EventType::miss: return "miss";
  }
  return "unknown";
}

VectorXd step_primitive(primitives::MotorPrimitive& dmp, double dt) {
  const VectorXd before = dmp.velocity();
  dmp.step(dt);
  return (dmp.velocity() - before) / dt;
}

RacketState racket_state(const robot::KinematicArm& arm, const robot::ArmState& state) {
  const auto pose = arm.forward_kinematics(state.q);
  return {pose.position, pose.normal(), arm.position_jacobian(state.q) * state.qd};
}

BallState launch_ball(const robot::KinematicArm& arm, const LaunchConfig& launch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Vector3d home = arm.forward_kinematics(arm.rest_posture()).position;
  BallState ball;
  ball.p = home + launch.offset + gaussian3(rng, launch.position_noise);
  ball.v = launch.velocity + gaussian3(rng, launch.velocity_noise);
  return ball;
}

TrialResult run_trial(const robot::KinematicArm& arm, const ArmController& controller,
                      const std::vector<TaskPrimitive>& prims_in, const TrialConfig& cfg, std::uint64_t seed,
                      TrialLog* log) {
  cfg.validate();
  require(prims_in.size() == 3, "run_trial expects the move, hit and orient primitives");
  const auto& sc = cfg.strategy;
  auto prims = prims_in;
  robot::ArmState state{arm.rest_posture(), VectorXd::Zero(static_cast<Eigen::Index>(arm.dof()))};
  BallState ball = launch_ball(arm, cfg.launch, seed);
  std::mt19937_64 observe_rng(seed ^ 0x9e3779b97f4a7c15ULL);

  TrialResult result;
  auto record = [&](double t, EventType type, const BallState& b) {
    if (log) log->events.push_back({t, type, b, racket_state(arm, state)});
  };

  auto replan = [&]() -> bool {
    BallState seen = ball;
    seen.p += gaussian3(observe_rng, cfg.launch.observation_noise);
    seen.v += gaussian3(observe_rng, cfg.launch.observation_noise);
    const auto plan = plan_hit(seen, sc);
    if (!plan) {
      result.failure = Failure::missed_ball;
      return false;
    }
    if (!plan->reachable) {
      result.failure = Failure::workspace_violation;
      return false;
    }
    const double duration = std::max(plan->time_to_hit, cfg.min_duration);
    const double normal_z = std::max(plan->normal.z(), kMinNormalZ);
    for (std::size_t k = 0; k < prims.size(); ++k) {
      auto& p = prims[k];
      const VectorXd x = arm.task_position(state.q, p.map);
      const VectorXd xd = arm.jacobian(state.q, p.map) * state.qd;
      VectorXd goal(static_cast<Eigen::Index>(p.map.dim()));
      VectorXd goal_vel = VectorXd::Zero(goal.size());
      if (k == kMove) {
        goal = plan->hit_point.head<2>();
      } else if (k == kHit) {
        goal(0) = sc.plane_height;
        goal_vel(0) = plan->racket_speed / normal_z;
      } else {
        goal(0) = pitch_for_normal(plan->normal, plan->hit_point);
      }
      p.dmp.retrigger(goal, goal_vel, duration, x, xd);
    }
    return true;
  };

  record(0.0, EventType::launch, ball);
  if (!replan()) {
    record(0.0, EventType::miss, ball);
    return result;
  }

  const auto steps = static_cast<long>(std::llround(cfg.max_time / cfg.dt));
  std::vector<VectorXd> accels(prims.size());
  for (long step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * cfg.dt;
    try {
      for (std::size_t k = 0; k < prims.size(); ++k) {
        auto& dmp = prims[k].dmp;
        VectorXd feedback = VectorXd::Zero(static_cast<Eigen::Index>(dmp.dof()));
        if (cfg.tracking_kp > 0.0 || cfg.tracking_kd > 0.0) {
          const auto& map = prims[k].map;
          feedback = cfg.tracking_kp * (dmp.position() - arm.task_position(state.q, map)) +
                     cfg.tracking_kd * (dmp.velocity() - arm.jacobian(state.q, map) * state.qd);
        }
        accels[k] = step_primitive(dmp, cfg.dt) + feedback;
      }
    } catch (const NumericalError&) {
      result.failure = Failure::non_finite;
      return result;
    }
    const VectorXd u = controller.control(arm, state, accels);
    if (log && log->record_steps) {
      log->t.push_back(t);
      log->q.push_back(state.q);
      log->qd.push_back(state.qd);
      log->u.push_back(u);
    }
    const auto status = robot::step_dynamics(arm, state, u, cfg.dt);
    result.end_time = t + cfg.dt;
    if (status == robot::StepStatus::non_finite) {
      result.failure = Failure::non_finite;
      return result;
    }
    if (status == robot::StepStatus::joint_limit) {
      result.failure = Failure::joint_limit;
      record(result.end_time, EventType::miss, ball);
      return result;
    }

    if (ball.v.z() > 0.0 && ball.v.z() / sc.gravity <= cfg.dt) {
      const double ta = ball.v.z() / sc.gravity;
      record(t + ta, EventType::apex, fly(ball, ta, sc.gravity));
    }
    const auto crossing = plane_crossing_time(ball, sc.plane_height, sc.gravity);
    if (crossing && *crossing <= cfg.dt) {
      BallState contact = fly(ball, *crossing, sc.gravity);
      const RacketState racket = racket_state(arm, state);
      std::optional<Vector3d> v_out;
      if ((contact.p - racket.p).norm() <= sc.racket_radius) v_out = reflect(contact.v, racket, sc.restitution);
      if (!v_out) {
        result.failure = Failure::missed_ball;
        record(t + *crossing, EventType::miss, contact);
        return result;
      }
      ++result.hits;
      contact.v = *v_out;
      record(t + *crossing, EventType::hit, contact);
      ball = fly(contact, cfg.dt - *crossing, sc.gravity);
      if (!replan()) {
        record(result.end_time, EventType::miss, ball);
        return result;
      }
      continue;
    }
    ball = fly(ball, cfg.dt, sc.gravity);
    if (!ball.p.allFinite()) {
      result.failure = Failure::non_finite;
      return result;
    }
  }
  result.failure = Failure::timeout_success;
  return result;
}

void write_event_csv(std::ostream& out, const std::vector<Event>& events) {
  out << "t,event,ball_px,ball_py,ball_pz,ball_vx,ball_vy,ball_vz,racket_px,racket_py,racket_pz,racket_nx,racket_ny,"
         "racket_nz\n";
  for (const auto& e : events) {
    out << io::format_double(e.t) << ',' << to_string(e.type);
    write_vec(out, e.ball.p);
    write_vec(out, e.ball.v);
    write_vec(out, e.racket.p);
    write_vec(out, e.racket.normal);
    out << '\n';
  }
}

void write_step_csv(std::ostream& out, const TrialLog& log) {
  const auto n = log.q.empty() ? 0 : log.q.front().size();
  out << 't';
  for (const char* prefix : {"q", "qd", "u"})
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << prefix << i;
  out << '\n';
  for (std::size_t k = 0; k < log.t.size(); ++k) {
    out << io::format_double(log.t[k]);
    for (const auto* v : {&log.q[k], &log.qd[k], &log.u[k]})
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << io::format_double((*v)(i));
    out << '\n';
  }
}

void to_json(nlohmann::json& j, const StrategyConfig& c) {
  j = nlohmann::json{{"plane_height", c.plane_height},   {"target_height", c.target_height},
                     {"target_xy", {c.target_xy.x(), c.target_xy.y()}},
                     {"restitution", c.restitution},     {"gravity", c.gravity},
                     {"racket_radius", c.racket_radius}, {"workspace_radius", c.workspace_radius}};
}

void from_json(const nlohmann::json& j, StrategyConfig& c) {
  c.plane_height = j.value("plane_height", c.plane_height);
  c.target_height = j.value("target_height", c.target_height);
  if (j.contains("target_xy")) {
    const auto xy = j.at("target_xy").get<std::vector<double>>();
    require(xy.size() == 2, "target_xy must have two entries");
    c.target_xy = Vector2d(xy[0], xy[1]);
  }
  c.restitution = j.value("restitution", c.restitution);
  c.gravity = j.value("gravity", c.gravity);
  c.racket_radius = j.value("racket_radius", c.racket_radius);
  c.workspace_radius = j.value("workspace_radius", c.workspace_radius);
  c.validate();
}

void to_json(nlohmann::json& j, const TrialConfig& c) {
  nlohmann::json strategy;
  to_json(strategy, c.strategy);
  j = nlohmann::json{{"strategy", strategy},
                     {"launch",
                      {{"offset", vec3_json(c.launch.offset)},
                       {"velocity", vec3_json(c.launch.velocity)},
                       {"position_noise", vec3_json(c.launch.position_noise)},
                       {"velocity_noise", vec3_json(c.launch.velocity_noise)},
                       {"observation_noise", c.launch.observation_noise}}},
                     {"dt", c.dt},
                     {"max_time", c.max_time},
                     {"min_duration", c.min_duration},
                     {"tracking_kp", c.tracking_kp},
                     {"tracking_kd", c.tracking_kd}};
}

TrialConfig trial_config_from_json(const nlohmann::json& j, const TrialConfig& defaults) {
  TrialConfig c = defaults;
  try {
    if (j.contains("strategy")) from_json(j.at("strategy"), c.strategy);
    if (j.contains("launch")) {
      const auto& l = j.at("launch");
      if (l.contains("offset")) c.launch.offset = vec3_from(l.at("offset"));
      if (l.contains("velocity")) c.launch.velocity = vec3_from(l.at("velocity"));
      if (l.contains("position_noise")) c.launch.position_noise = noise_from(l.at("position_noise"));
      if (l.contains("velocity_noise")) c.launch.velocity_noise = noise_from(l.at("velocity_noise"));
      c.launch.observation_noise = l.value("observation_noise", c.launch.observation_noise);
    }
    c.dt = j.value("dt", c.dt);
    c.max_time = j.value("max_time", c.max_time);
    c.min_duration = j.value("min_duration", c.min_duration);
    c.tracking_kp = j.value("tracking_kp", c.tracking_kp);
    c.tracking_kd = j.value("tracking_kd", c.tracking_kd);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("trial configuration: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace prioctl::bounce
