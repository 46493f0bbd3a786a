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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

using namespace prioctl;
using namespace prioctl::primitives;

namespace {

TaskTrajectory rollout(MotorPrimitive mp, const VectorXd& x0, const VectorXd& xd0, double duration,
                       double dt = kDefaultDt) {
  mp.reset(x0, xd0);
  TaskTrajectory traj;
  traj.samples.push_back({0.0, mp.position(), mp.velocity(), mp.current_acceleration()});
  const auto steps = std::lround(duration / dt);
  for (long k = 0; k < steps; ++k) traj.samples.push_back(mp.step(dt));
  return traj;
}

double position_rmse(const TaskTrajectory& a, const TaskTrajectory& b) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    sum += (a.samples[k].x - b.samples[k].x).squaredNorm();
    count += static_cast<std::size_t>(a.samples[k].x.size());
  }
  return std::sqrt(sum / static_cast<double>(count));
}

MotorPrimitive random_primitive(std::mt19937_64& rng, std::size_t dof, std::size_t n_basis, PrimitiveMode mode) {
  std::normal_distribution<double> nd(0.0, 20.0);
  MotorPrimitive mp(dof, BasisSet::spaced_in_time(n_basis), mode);
  for (Eigen::Index i = 0; i < mp.weights.size(); ++i) mp.weights.data()[i] = nd(rng);
  mp.goal = VectorXd::LinSpaced(static_cast<Eigen::Index>(dof), 0.5, 1.0);
  if (mode == PrimitiveMode::velocity_goal) mp.goal_velocity = VectorXd::Constant(static_cast<Eigen::Index>(dof), 0.4);
  mp.tau = 1.0 / 0.8;
  return mp;
}

// 10 t^3 - 15 t^4 + 6 t^5 from 0 to 1 over one second.
TaskTrajectory minimum_jerk(double duration, double amplitude, double dt = kDefaultDt) {
  TaskTrajectory traj;
  const auto steps = std::lround(duration / dt);
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double s = t / duration;
    const double x = amplitude * (10 * std::pow(s, 3) - 15 * std::pow(s, 4) + 6 * std::pow(s, 5));
    const double xd = amplitude * (30 * s * s - 60 * s * s * s + 30 * std::pow(s, 4)) / duration;
    const double xdd = amplitude * (60 * s - 180 * s * s + 120 * s * s * s) / (duration * duration);
    traj.samples.push_back({t, VectorXd::Constant(1, x), VectorXd::Constant(1, xd), VectorXd::Constant(1, xdd)});
  }
  return traj;
}

}  // namespace

// --- canonical system -------------------------------------------------------

TEST(Canonical, ZeroStepKeepsPhase) {
  const auto cs = step_canonical({1.0, 1.0, 3.0}, 0.0);
  EXPECT_EQ(cs.z, 1.0);
}

TEST(Canonical, UnitStepMatchesClosedForm) {
  const auto cs = step_canonical({1.0, 1.0, 3.0}, 1.0);
  EXPECT_NEAR(cs.z, std::exp(-3.0), 1e-15);
  EXPECT_NEAR(cs.z, 0.0498, 1e-4);
}

TEST(Canonical, TwoHalfStepsEqualOneStep) {
  const CanonicalSystem start{1.0, 1.0, 3.0};
  const auto half = step_canonical(step_canonical(start, 0.5), 0.5);
  EXPECT_NEAR(half.z, step_canonical(start, 1.0).z, 1e-16);
}

TEST(Canonical, NegativeStepRejected) {
  EXPECT_THROW(step_canonical({1.0, 1.0, 3.0}, -1e-3), InvalidArgument);
}

TEST(Canonical, PropertyStepsMatchClosedForm) {
  std::mt19937_64 rng(11);
  // Ranges keep the final phase well above underflow (exponent <= 100).
  std::uniform_real_distribution<double> tau(0.1, 5.0), az(0.5, 5.0), dt(1e-4, 0.01);
  std::uniform_int_distribution<int> steps(1, 400);
  for (int trial = 0; trial < 200; ++trial) {
    CanonicalSystem cs{1.0, tau(rng), az(rng)};
    const double h = dt(rng);
    const int n = steps(rng);
    for (int k = 0; k < n; ++k) cs = step_canonical(cs, h);
    const double expected = phase_at(cs.tau, cs.alpha_z, h * n);
    EXPECT_NEAR(cs.z / expected, 1.0, 1e-12);
  }
}

// --- basis ------------------------------------------------------------------

TEST(Basis, SingleKernelIsOne) {
  const auto b = BasisSet::spaced_in_time(1);
  for (double z : {1.0, 0.3, 1e-3}) {
    const VectorXd psi = basis_activations(b, z);
    ASSERT_EQ(psi.size(), 1);
    EXPECT_DOUBLE_EQ(psi(0), 1.0);
  }
}

TEST(Basis, PeakAtOwnCenter) {
  const auto b = BasisSet::spaced_in_time(6);
  for (Eigen::Index k = 0; k < 6; ++k) {
    Eigen::Index arg;
    basis_activations(b, b.centers(k)).maxCoeff(&arg);
    EXPECT_EQ(arg, k);
  }
}

TEST(Basis, TenKernelsSumToOne) {
  const VectorXd psi = basis_activations(BasisSet::spaced_in_time(10), 0.5);
  EXPECT_NEAR(psi.sum(), 1.0, 1e-12);
  EXPECT_GE(psi.minCoeff(), 0.0);
}

TEST(Basis, PropertyPartitionOfUnity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(1e-3, 1.0), width(0.5, 500.0);
  std::uniform_int_distribution<int> count(1, 30);
  for (int trial = 0; trial < 500; ++trial) {
    BasisSet b;
    const int n = count(rng);
    b.centers.resize(n);
    b.widths.resize(n);
    for (int i = 0; i < n; ++i) {
      b.centers(i) = unit(rng);
      b.widths(i) = width(rng);
    }
    const VectorXd psi = basis_activations(b, unit(rng));
    EXPECT_NEAR(psi.sum(), 1.0, 1e-12);
    EXPECT_GE(psi.minCoeff(), 0.0);
  }
}

TEST(Basis, EmptyBasisRejected) {
  EXPECT_THROW(basis_activations(BasisSet{}, 0.5), InvalidArgument);
}

TEST(Basis, CentersEquallySpacedInTime) {
  const auto b = BasisSet::spaced_in_time(5);
  for (Eigen::Index i = 0; i < 5; ++i)
    EXPECT_NEAR(b.centers(i), std::exp(-kDefaultAlphaZ * static_cast<double>(i) / 4.0), 1e-15);
  EXPECT_NEAR(b.widths(0), 1.0 / std::pow(b.centers(1) - b.centers(0), 2), 1e-9);
  EXPECT_EQ(b.widths(4), b.widths(3));
}

// --- forcing ----------------------------------------------------------------

TEST(Forcing, ZeroWeightsGiveZero) {
  MotorPrimitive mp(2, BasisSet::spaced_in_time(5));
  EXPECT_EQ(mp.forcing(0.7).norm(), 0.0);
}

TEST(Forcing, HandEvaluation) {
  MotorPrimitive mp(1, BasisSet::spaced_in_time(1));
  mp.weights(0, 0) = 2.0;
  EXPECT_DOUBLE_EQ(mp.forcing(0.5)(0), 1.0);
}

TEST(Forcing, VanishesWithPhase) {
  std::mt19937_64 rng(5);
  auto mp = random_primitive(rng, 2, 8, PrimitiveMode::standard);
  EXPECT_LT(mp.forcing(1e-9).norm(), 1e-6);
}

TEST(Forcing, WeightShapeMismatchRejected) {
  MotorPrimitive mp(2, BasisSet::spaced_in_time(5));
  mp.weights = MatrixXd::Zero(4, 2);
  EXPECT_THROW(mp.forcing(0.5), InvalidArgument);
}

// --- integration ------------------------------------------------------------

TEST(Step, GoalIsFixedPoint) {
  MotorPrimitive mp(2, BasisSet::spaced_in_time(5));
  mp.goal = Eigen::Vector2d(0.3, -0.2);
  mp.reset(mp.goal, VectorXd::Zero(2));
  for (int k = 0; k < 500; ++k) mp.step(kDefaultDt);
  EXPECT_LT((mp.position() - mp.goal).norm(), 1e-14);
  EXPECT_LT(mp.velocity().norm(), 1e-14);
}

TEST(Step, ConvergesWithinThreeDurations) {
  MotorPrimitive mp(2, BasisSet::spaced_in_time(5));
  mp.goal = Eigen::Vector2d(1.0, -0.5);
  mp.tau = 2.0;
  const VectorXd x0 = Eigen::Vector2d(0.0, 0.5);
  mp.reset(x0, VectorXd::Zero(2));
  for (int k = 0; k < 1500; ++k) mp.step(kDefaultDt);
  EXPECT_LT((mp.position() - mp.goal).norm(), 1e-3 * (mp.goal - x0).norm());
}

TEST(Step, VelocityGoalEndpoint) {
  for (double duration : {0.3, 0.6, 1.0}) {
    MotorPrimitive mp(1, BasisSet::spaced_in_time(10), PrimitiveMode::velocity_goal);
    mp.retrigger(VectorXd::Constant(1, 0.4), VectorXd::Constant(1, 1.5), duration, VectorXd::Constant(1, 0.4),
                 VectorXd::Zero(1));
    const auto steps = std::lround(duration / kDefaultDt);
    for (long k = 0; k < steps; ++k) mp.step(kDefaultDt);
    // Relative to the goal velocity, the natural scale of this movement.
    EXPECT_LT(std::abs(mp.position()(0) - 0.4) / 1.5, 1e-2) << duration;
    EXPECT_LT(std::abs(mp.velocity()(0) - 1.5) / 1.5, 1e-2) << duration;
  }
}

TEST(Step, MovingGoalLandsOnGoalAtDuration) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto mp = random_primitive(rng, 3, 4, PrimitiveMode::velocity_goal);
    mp.tau = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    mp.reset(VectorXd::Zero(3), VectorXd::Zero(3));
    const double z_end = std::exp(-mp.alpha_z);
    EXPECT_LT((mp.moving_goal(z_end) - mp.goal).norm(), 1e-12);
  }
}

TEST(Step, NonPositiveDtRejected) {
  MotorPrimitive mp(1, BasisSet::spaced_in_time(3));
  mp.reset(VectorXd::Zero(1), VectorXd::Zero(1));
  EXPECT_THROW(mp.step(0.0), InvalidArgument);
}

TEST(Step, DivergenceReported) {
  MotorPrimitive mp(1, BasisSet::spaced_in_time(3));
  mp.weights.setConstant(1e308);
  mp.goal = VectorXd::Constant(1, 1.0);
  mp.reset(VectorXd::Zero(1), VectorXd::Zero(1));
  EXPECT_THROW(
      {
        for (int k = 0; k < 100; ++k) mp.step(0.01);
      },
      NumericalError);
}

TEST(Step, FourthOrderConvergence) {
  std::mt19937_64 rng(21);
  for (auto mode : {PrimitiveMode::standard, PrimitiveMode::velocity_goal}) {
    auto mp = random_primitive(rng, 2, 6, mode);
    auto run = [&](double dt) {
      auto copy = mp;
      copy.reset(VectorXd::Zero(2), VectorXd::Zero(2));
      const auto steps = std::lround(0.4 / dt);
      for (long k = 0; k < steps; ++k) copy.step(dt);
      return copy.position();
    };
    const VectorXd a = run(0.005), b = run(0.0025), c = run(0.00125);
    const double ratio = (a - b).norm() / (b - c).norm();
    EXPECT_GT(ratio, 12.0);
    EXPECT_LT(ratio, 20.0);
  }
}

TEST(Step, StepAccelerationMatchesStateDerivative) {
  std::mt19937_64 rng(4);
  auto mp = random_primitive(rng, 2, 6, PrimitiveMode::standard);
  mp.reset(VectorXd::Zero(2), VectorXd::Zero(2));
  for (int k = 0; k < 100; ++k) {
    const auto s = mp.step(kDefaultDt);
    EXPECT_LT((s.xdd - mp.current_acceleration()).norm(), 1e-12);
  }
}

// --- imitation --------------------------------------------------------------

TEST(Imitate, RoundTripKnownPrimitive) {
  std::mt19937_64 rng(1);
  for (auto mode : {PrimitiveMode::standard, PrimitiveMode::velocity_goal}) {
    auto source = random_primitive(rng, 2, 12, mode);
    const VectorXd x0 = Eigen::Vector2d(-0.2, 0.1);
    const auto demo = rollout(source, x0, VectorXd::Zero(2), 0.8);
    const auto mp = imitate(demo, 12, mode);
    const auto rep = replay(mp, demo);
    const double amplitude = (demo.samples.back().x - x0).cwiseAbs().maxCoeff();
    EXPECT_LT(position_rmse(rep, demo), 1e-3 * amplitude) << to_string(mode);
  }
}

TEST(Imitate, MinimumJerkEndpoint) {
  const auto demo = minimum_jerk(1.0, 1.0);
  const auto rep = replay(imitate(demo, 15, PrimitiveMode::standard), demo);
  EXPECT_NEAR(rep.samples.back().x(0), 1.0, 1e-2);
  EXPECT_LT(position_rmse(rep, demo), 1e-3);
}

TEST(Imitate, ConstantDemoNeedsNoForcing) {
  TaskTrajectory demo;
  for (int k = 0; k <= 500; ++k)
    demo.samples.push_back({k * 1e-3, VectorXd::Constant(1, 0.7), VectorXd::Zero(1), VectorXd::Zero(1)});
  const auto mp = imitate(demo, 10, PrimitiveMode::standard);
  EXPECT_LT(mp.weights.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(mp.amplitude(0), 1.0);
  const auto rep = replay(mp, demo);
  for (const auto& s : rep.samples) EXPECT_NEAR(s.x(0), 0.7, 1e-12);
}

TEST(Imitate, InvariantUnderAmplitudeAndDurationScaling) {
  for (const auto& [duration, amplitude] : {std::pair{1.0, 1.0}, {0.5, 3.0}, {2.0, 0.2}}) {
    const auto demo = minimum_jerk(duration, amplitude);
    const auto rep = replay(imitate(demo, 15, PrimitiveMode::standard), demo);
    EXPECT_LT(position_rmse(rep, demo), 1e-3 * amplitude) << duration << " " << amplitude;
  }
}

TEST(Imitate, TooFewSamplesRejected) {
  const auto demo = minimum_jerk(1.0, 1.0, 0.1);
  EXPECT_THROW(imitate(demo, 10, PrimitiveMode::standard), InvalidArgument);
}

// --- files ------------------------------------------------------------------

TEST(Files, TrajectoryCsvRoundTrip) {
  const auto demo = minimum_jerk(0.2, 1.0, 0.01);
  std::ostringstream out;
  write_trajectory_csv(out, demo);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,x0,xd0,xdd0");
  std::istringstream in(out.str());
  const auto back = read_trajectory_csv(in);
  ASSERT_EQ(back.samples.size(), demo.samples.size());
  for (std::size_t k = 0; k < demo.samples.size(); ++k) {
    EXPECT_EQ(back.samples[k].t, demo.samples[k].t);
    EXPECT_EQ(back.samples[k].x, demo.samples[k].x);
    EXPECT_EQ(back.samples[k].xdd, demo.samples[k].xdd);
  }
}

TEST(Files, TrajectoryRejectsNonIncreasingTime) {
  std::istringstream in("t,x0,xd0,xdd0\n0,0,0,0\n0,1,0,0\n");
  EXPECT_THROW(read_trajectory_csv(in), InvalidArgument);
}

TEST(Files, PrimitiveJsonRoundTrip) {
  std::mt19937_64 rng(2);
  auto mp = random_primitive(rng, 2, 7, PrimitiveMode::velocity_goal);
  mp.reset(VectorXd::Zero(2), VectorXd::Zero(2));
  const nlohmann::json j = mp;
  for (const char* key : {"dof", "tau", "alpha_y", "beta_y", "alpha_h", "goal", "goal_velocity", "amplitude",
                          "centers", "widths", "weights"})
    EXPECT_TRUE(j.contains(key)) << key;
  const auto back = j.get<MotorPrimitive>();
  EXPECT_EQ(back.weights, mp.weights);
  EXPECT_EQ(back.goal, mp.goal);
  EXPECT_EQ(back.mode(), mp.mode());
  EXPECT_EQ(back.basis().widths, mp.basis().widths);
}
