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

#include "prioctl/primitives.hpp"

#include "prioctl/io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace prioctl::primitives {

namespace {

constexpr double kAmplitudeFloor = 1e-6;

VectorXd amplitude_for(const VectorXd& goal, const VectorXd& start) {
  VectorXd a = goal - start;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::abs(a(i)) < kAmplitudeFloor) a(i) = 1.0;
  return a;
}

}  // namespace

CanonicalSystem step_canonical(const CanonicalSystem& cs, double dt) {
  require(dt >= 0.0, "step_canonical: dt must be non-negative");
  require(cs.z > 0.0, "step_canonical: phase must be positive");
  CanonicalSystem next = cs;
  next.z = cs.z * std::exp(-cs.tau * cs.alpha_z * dt);
  return next;
}

BasisSet BasisSet::spaced_in_time(std::size_t count, double alpha_z) {
  require(count > 0, "basis set needs at least one kernel");
  BasisSet basis;
  const auto n = static_cast<Eigen::Index>(count);
  basis.centers.resize(n);
  basis.widths.resize(n);
  if (count == 1) {
    basis.centers(0) = 1.0;
    basis.widths(0) = 1.0;
    return basis;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    basis.centers(i) = std::exp(-alpha_z * static_cast<double>(i) / static_cast<double>(n - 1));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double gap = basis.centers(i + 1) - basis.centers(i);
    basis.widths(i) = 1.0 / (gap * gap);
  }
  basis.widths(n - 1) = basis.widths(n - 2);
  return basis;
}

VectorXd basis_activations(const BasisSet& basis, double z) {
  require(basis.size() > 0, "basis_activations: empty basis");
  require(basis.widths.size() == basis.centers.size(), "basis_activations: widths/centers mismatch");
  // log-sum-exp keeps the normalization finite far from every center.
  const VectorXd exponent = -(basis.widths.array() * (z - basis.centers.array()).square()).matrix();
  const double peak = exponent.maxCoeff();
  VectorXd psi = (exponent.array() - peak).exp().matrix();
  return psi / psi.sum();
}

std::string to_string(PrimitiveMode mode) {
  return mode == PrimitiveMode::standard ? "standard" : "velocity_goal";
}

PrimitiveMode primitive_mode_from_string(const std::string& name) {
  if (name == "standard") return PrimitiveMode::standard;
  if (name == "velocity_goal") return PrimitiveMode::velocity_goal;
  throw InvalidArgument("unknown primitive mode '" + name + "'");
}

void TaskTrajectory::validate() const {
  require(!samples.empty(), "trajectory has no samples");
  const auto d = samples.front().x.size();
  require(d > 0, "trajectory samples have zero dimension");
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    require(s.x.size() == d && s.xd.size() == d && s.xdd.size() == d,
            "trajectory sample " + std::to_string(k) + " has inconsistent dimension");
    require(std::isfinite(s.t) && s.x.allFinite() && s.xd.allFinite() && s.xdd.allFinite(),
            "trajectory sample " + std::to_string(k) + " is not finite");
    if (k > 0) require(s.t > samples[k - 1].t, "trajectory timestamps must increase strictly");
  }
}

void write_trajectory_csv(std::ostream& out, const TaskTrajectory& traj) {
  traj.validate();
  const auto d = traj.dof();
  out << "t";
  for (const char* prefix : {"x", "xd", "xdd"})
    for (std::size_t i = 0; i < d; ++i) out << ',' << prefix << i;
  out << '\n';
  for (const auto& s : traj.samples) {
    out << io::format_double(s.t);
    for (const VectorXd* v : {&s.x, &s.xd, &s.xdd})
      for (Eigen::Index i = 0; i < v->size(); ++i) out << ',' << io::format_double((*v)(i));
    out << '\n';
  }
}

TaskTrajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  require(io::next_line(in, line), "trajectory CSV is empty");
  const auto header = io::split(line);
  require(header.size() >= 4 && (header.size() - 1) % 3 == 0 && header[0] == "t",
          "trajectory CSV header must be t,x0..,xd0..,xdd0..");
  const std::size_t d = (header.size() - 1) / 3;
  for (std::size_t i = 0; i < d; ++i) {
    require(header[1 + i] == "x" + std::to_string(i) && header[1 + d + i] == "xd" + std::to_string(i) &&
                header[1 + 2 * d + i] == "xdd" + std::to_string(i),
            "trajectory CSV header column names are out of order");
  }
  TaskTrajectory traj;
  const auto di = static_cast<Eigen::Index>(d);
  while (io::next_line(in, line)) {
    const auto fields = io::split(line);
    require(fields.size() == header.size(), "trajectory CSV row has the wrong number of fields");
    TaskSample s;
    s.t = io::parse_double(fields[0]);
    s.x.resize(di);
    s.xd.resize(di);
    s.xdd.resize(di);
    for (std::size_t i = 0; i < d; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      s.x(ii) = io::parse_double(fields[1 + i]);
      s.xd(ii) = io::parse_double(fields[1 + d + i]);
      s.xdd(ii) = io::parse_double(fields[1 + 2 * d + i]);
    }
    traj.samples.push_back(std::move(s));
  }
  traj.validate();
  return traj;
}

MotorPrimitive::MotorPrimitive(std::size_t dof, BasisSet basis, PrimitiveMode mode)
    : dof_(dof), basis_(std::move(basis)), mode_(mode) {
  require(dof > 0, "primitive needs at least one degree of freedom");
  require(basis_.size() > 0, "primitive needs a non-empty basis");
  const auto d = static_cast<Eigen::Index>(dof);
  weights = MatrixXd::Zero(static_cast<Eigen::Index>(basis_.size()), d);
  goal = VectorXd::Zero(d);
  goal_velocity = VectorXd::Zero(d);
  amplitude = VectorXd::Ones(d);
  y1_ = VectorXd::Zero(d);
  y2_ = VectorXd::Zero(d);
  moving_goal_start_ = goal;
}

void MotorPrimitive::validate() const {
  const auto d = static_cast<Eigen::Index>(dof_);
  require(dof_ > 0, "primitive has zero dimension");
  require(weights.rows() == static_cast<Eigen::Index>(basis_.size()) && weights.cols() == d,
          "primitive weight matrix must be n_basis x dof");
  require(goal.size() == d && goal_velocity.size() == d && amplitude.size() == d,
          "primitive goal/goal_velocity/amplitude must have dof entries");
  require(tau > 0.0 && std::isfinite(tau), "primitive tau must be positive");
  require(alpha_z > 0.0, "primitive alpha_z must be positive");
  if (mode_ == PrimitiveMode::velocity_goal) require(alpha_h > 0.0, "velocity-goal primitive needs alpha_h > 0");
}

void MotorPrimitive::reset(const VectorXd& x, const VectorXd& xd) {
  validate();
  const auto d = static_cast<Eigen::Index>(dof_);
  require(x.size() == d && xd.size() == d, "primitive reset: state dimension mismatch");
  y1_ = x;
  y2_ = xd / tau;
  z_ = 1.0;
  t_ = 0.0;
  amplitude = amplitude_for(goal, x);
  if (mode_ == PrimitiveMode::velocity_goal) {
    // -ln(z(T))/(tau*alpha_h) = alpha_z/(tau*alpha_h), so this start lands
    // the moving goal on `goal` exactly at t = T.
    moving_goal_start_ = goal - goal_velocity * (alpha_z / (tau * alpha_h));
  } else {
    moving_goal_start_ = goal;
  }
}

void MotorPrimitive::retrigger(const VectorXd& new_goal, const VectorXd& new_goal_velocity, double duration,
                               const VectorXd& x, const VectorXd& xd) {
  require(duration > 0.0 && std::isfinite(duration), "primitive retrigger: duration must be positive");
  require(new_goal.size() == static_cast<Eigen::Index>(dof_) &&
              new_goal_velocity.size() == static_cast<Eigen::Index>(dof_),
          "primitive retrigger: goal dimension mismatch");
  goal = new_goal;
  goal_velocity = mode_ == PrimitiveMode::velocity_goal ? new_goal_velocity : VectorXd::Zero(new_goal.size());
  tau = 1.0 / duration;
  reset(x, xd);
}

VectorXd MotorPrimitive::forcing(double z) const {
  require(weights.rows() == static_cast<Eigen::Index>(basis_.size()) &&
              weights.cols() == static_cast<Eigen::Index>(dof_),
          "forcing: weight matrix shape mismatch");
  const VectorXd psi = basis_activations(basis_, z);
  return (weights.transpose() * psi) * z;
}

VectorXd MotorPrimitive::moving_goal(double z) const {
  if (mode_ == PrimitiveMode::standard) return goal;
  return moving_goal_start_ - goal_velocity * (std::log(z) / (tau * alpha_h));
}

VectorXd MotorPrimitive::y2_rate(const VectorXd& y1, const VectorXd& y2, double z) const {
  const VectorXd drive = tau * amplitude.cwiseProduct(forcing(z));
  if (mode_ == PrimitiveMode::standard) return tau * alpha_y * (beta_y * (goal - y1) - y2) + drive;
  const VectorXd gm = moving_goal(z);
  return (1.0 - z) * tau * alpha_y * (beta_y * (gm - y1) + (goal_velocity / tau - y2)) + drive;
}

VectorXd MotorPrimitive::acceleration(const VectorXd& x, const VectorXd& xd, double z) const {
  return tau * y2_rate(x, xd / tau, z);
}

TaskSample MotorPrimitive::step(double dt) {
  require(dt > 0.0, "primitive step: dt must be positive");
  const double decay_half = std::exp(-tau * alpha_z * dt * 0.5);
  const double z0 = z_;
  const double zh = z0 * decay_half;
  const double z1 = zh * decay_half;

  const VectorXd k1_y1 = tau * y2_;
  const VectorXd k1_y2 = y2_rate(y1_, y2_, z0);
  const VectorXd k2_y1 = tau * (y2_ + 0.5 * dt * k1_y2);
  const VectorXd k2_y2 = y2_rate(y1_ + 0.5 * dt * k1_y1, y2_ + 0.5 * dt * k1_y2, zh);
  const VectorXd k3_y1 = tau * (y2_ + 0.5 * dt * k2_y2);
  const VectorXd k3_y2 = y2_rate(y1_ + 0.5 * dt * k2_y1, y2_ + 0.5 * dt * k2_y2, zh);
  const VectorXd k4_y1 = tau * (y2_ + dt * k3_y2);
  const VectorXd k4_y2 = y2_rate(y1_ + dt * k3_y1, y2_ + dt * k3_y2, z1);

  y1_ += dt / 6.0 * (k1_y1 + 2.0 * k2_y1 + 2.0 * k3_y1 + k4_y1);
  y2_ += dt / 6.0 * (k1_y2 + 2.0 * k2_y2 + 2.0 * k3_y2 + k4_y2);
  z_ = z1;
  t_ += dt;
  if (!y1_.allFinite() || !y2_.allFinite()) throw NumericalError("motor primitive state diverged");

  TaskSample out;
  out.t = t_;
  out.x = y1_;
  out.xd = tau * y2_;
  out.xdd = tau * y2_rate(y1_, y2_, z_);
  return out;
}

MotorPrimitive imitate(const TaskTrajectory& demo, std::size_t n_basis, PrimitiveMode mode,
                       const ImitationOptions& options) {
  demo.validate();
  require(n_basis > 0, "imitate: n_basis must be positive");
  require(demo.samples.size() >= 2 * n_basis, "imitate: demo needs at least 2*n_basis samples");
  const double duration = demo.duration();
  require(duration > 0.0, "imitate: demo has zero duration");

  const std::size_t d = demo.dof();
  MotorPrimitive mp(d, BasisSet::spaced_in_time(n_basis, options.alpha_z), mode);
  mp.alpha_y = options.alpha_y;
  mp.beta_y = options.alpha_y / 4.0;
  mp.alpha_z = options.alpha_z;
  mp.alpha_h = options.alpha_z;
  mp.tau = 1.0 / duration;

  const auto& first = demo.samples.front();
  const auto& last = demo.samples.back();
  mp.goal = last.x;
  mp.goal_velocity = mode == PrimitiveMode::velocity_goal ? last.xd : VectorXd::Zero(last.x.size());
  mp.reset(first.x, first.xd);  // fixes amplitude and the moving-goal start

  const double tau = mp.tau;
  const auto nb = static_cast<Eigen::Index>(n_basis);
  const auto rows = static_cast<Eigen::Index>(demo.samples.size());
  // One ridge regression over all samples: f(z) is linear in the weights
  // through the normalized activations scaled by z.
  MatrixXd design(rows, nb);
  MatrixXd targets(rows, static_cast<Eigen::Index>(d));
  for (Eigen::Index t = 0; t < rows; ++t) {
    const auto& s = demo.samples[static_cast<std::size_t>(t)];
    const double z = phase_at(tau, mp.alpha_z, s.t - first.t);
    VectorXd spring;
    if (mode == PrimitiveMode::standard) {
      spring = mp.alpha_y * (mp.beta_y * (mp.goal - s.x) - s.xd / tau);
    } else {
      spring = (1.0 - z) * mp.alpha_y *
               (mp.beta_y * (mp.moving_goal(z) - s.x) + (mp.goal_velocity - s.xd) / tau);
    }
    targets.row(t) = ((s.xdd / (tau * tau)) - spring).cwiseQuotient(mp.amplitude).transpose();
    design.row(t) = (basis_activations(mp.basis(), z) * z).transpose();
  }
  MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += options.ridge;
  mp.weights = gram.ldlt().solve(design.transpose() * targets);
  return mp;
}

TaskTrajectory replay(MotorPrimitive primitive, const TaskTrajectory& reference, double dt) {
  reference.validate();
  require(dt > 0.0, "replay: dt must be positive");
  const auto& first = reference.samples.front();
  primitive.reset(first.x, first.xd);
  TaskTrajectory out;
  out.samples.reserve(reference.samples.size());
  TaskSample start{first.t, primitive.position(), primitive.velocity(), primitive.current_acceleration()};
  out.samples.push_back(start);
  for (std::size_t k = 1; k < reference.samples.size(); ++k) {
    const double target = reference.samples[k].t - first.t;
    TaskSample s;
    while (primitive.elapsed() < target - 1e-12) s = primitive.step(std::min(dt, target - primitive.elapsed()));
    s.t = reference.samples[k].t;
    out.samples.push_back(std::move(s));
  }
  return out;
}

void to_json(nlohmann::json& j, const MotorPrimitive& mp) {
  j = nlohmann::json{{"dof", mp.dof()},
                     {"mode", to_string(mp.mode())},
                     {"tau", mp.tau},
                     {"alpha_y", mp.alpha_y},
                     {"beta_y", mp.beta_y},
                     {"alpha_z", mp.alpha_z},
                     {"alpha_h", mp.alpha_h},
                     {"goal", io::to_json(mp.goal)},
                     {"goal_velocity", io::to_json(mp.goal_velocity)},
                     {"amplitude", io::to_json(mp.amplitude)},
                     {"centers", io::to_json(mp.basis().centers)},
                     {"widths", io::to_json(mp.basis().widths)},
                     {"weights", io::to_json(mp.weights)}};
}

void from_json(const nlohmann::json& j, MotorPrimitive& mp) {
  BasisSet basis{io::vector_from_json(j.at("centers")), io::vector_from_json(j.at("widths"))};
  const auto mode = primitive_mode_from_string(j.value("mode", std::string("standard")));
  MotorPrimitive out(j.at("dof").get<std::size_t>(), std::move(basis), mode);
  out.tau = j.at("tau").get<double>();
  out.alpha_y = j.at("alpha_y").get<double>();
  out.beta_y = j.at("beta_y").get<double>();
  out.alpha_z = j.value("alpha_z", kDefaultAlphaZ);
  out.alpha_h = j.at("alpha_h").get<double>();
  out.goal = io::vector_from_json(j.at("goal"));
  out.goal_velocity = io::vector_from_json(j.at("goal_velocity"));
  out.amplitude = io::vector_from_json(j.at("amplitude"));
  out.weights = io::matrix_from_json(j.at("weights"));
  out.validate();
  mp = std::move(out);
}

}  // namespace prioctl::primitives
