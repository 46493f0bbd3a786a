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

#include "prioctl/prioritized.hpp"
#include "prioctl/robot.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include <nlohmann/json.hpp>

using namespace prioctl;
using namespace prioctl::prioritized;
using prioctl::testing::gaussian;
using robot::TaskMap;

namespace {

// Three one-dimensional tasks (x, y, z) on the coupled prismatic arm. Every
// task map is linear, so each learned layer can represent its target exactly.
struct Fixture {
  robot::KinematicArm arm = prioctl::testing::coupled_arm();
  std::vector<TaskMap> maps{TaskMap::parse("x"), TaskMap::parse("y"), TaskMap::parse("z")};
  std::vector<PrimitiveSpec> specs{{"px", 1}, {"py", 1}, {"pz", 1}};
  learning::CostModel cost = learning::CostModel::defaults(4);
  std::vector<learning::Dataset> data;

  explicit Fixture(std::size_t rows = 400) {
    for (std::size_t i = 0; i < maps.size(); ++i)
      data.push_back(prioctl::testing::oracle_dataset(arm, maps[i], cost, rows, 100 + i));
  }

  double task_acc(std::size_t i, const VectorXd& q, const VectorXd& u) const {
    return (arm.jacobian(q, maps[i]) * u)(0);
  }
};

std::vector<VectorXd> accels_with(std::size_t n, std::size_t active, double value) {
  std::vector<VectorXd> a(n, VectorXd::Zero(1));
  a[active](0) = value;
  return a;
}

}  // namespace

TEST(Orders, EnumerationCounts) {
  EXPECT_EQ(enumerate_orders(1).size(), 1u);
  EXPECT_EQ(enumerate_orders(3).size(), 6u);
  EXPECT_EQ(enumerate_orders(4).size(), 24u);
  EXPECT_EQ(enumerate_orders(6).size(), 720u);
  EXPECT_THROW(enumerate_orders(7), InvalidArgument);
  EXPECT_THROW(enumerate_orders(0), InvalidArgument);
  std::set<std::vector<std::size_t>> seen;
  for (const auto& o : enumerate_orders(4)) {
    EXPECT_NO_THROW(o.validate(4));
    seen.insert(o.ordering);
  }
  EXPECT_EQ(seen.size(), 24u);
}

TEST(Orders, LabelsAndParsing) {
  const std::vector<std::string> names{"move", "hit", "orient"};
  const DominanceOrder o{{2, 0, 1}};  // lowest first
  EXPECT_EQ(o.label(names), "hit>=move>=orient");
  EXPECT_EQ(o.csv(names), "hit,move,orient");
  EXPECT_EQ(o.top(), 1u);
  EXPECT_EQ(DominanceOrder::parse("hit,move,orient", names), o);
  EXPECT_EQ(DominanceOrder::parse("hit>=move>=orient", names), o);
  EXPECT_THROW(DominanceOrder::parse("hit,move", names), InvalidArgument);
  EXPECT_THROW(DominanceOrder::parse("hit,hit,orient", names), InvalidArgument);
  EXPECT_THROW(DominanceOrder::parse("hit,move,spin", names), InvalidArgument);
}

TEST(Stack, SinglePrimitiveReducesToWeightedFit) {
  Fixture f;
  const std::vector<PrimitiveSpec> one{f.specs[0]};
  const std::vector<learning::Dataset> d{f.data[0]};
  const auto ctrl = train_prioritized(one, d, DominanceOrder{{0}}, f.cost);

  // Offsets from u0 regressed on the same features with the same weights.
  learning::Dataset offsets = f.data[0];
  for (Eigen::Index t = 0; t < offsets.u.rows(); ++t)
    offsets.u.row(t) -= f.cost.null_space_control(offsets.q(t), offsets.qd(t)).transpose();
  auto cost = f.cost;
  cost.alpha = ctrl.cost.alpha;
  VectorXd w(offsets.u.rows());
  for (Eigen::Index t = 0; t < w.size(); ++t) w(t) = std::exp(-cost.alpha * offsets.u.row(t).squaredNorm());
  const auto direct = learning::fit_weighted(offsets, w);
  const auto& lin = std::get<learning::LinearPolicy>(ctrl.layers[0].policy);
  EXPECT_LT((lin.theta - direct.theta).norm(), 1e-12);

  const auto single = train_single_model(one, d, f.cost);
  EXPECT_LT((std::get<learning::LinearPolicy>(single.layers[0].policy).theta - lin.theta).norm(), 1e-12);
}

TEST(Stack, TraceTelescopes) {
  Fixture f;
  std::vector<LayerTrace> trace;
  const DominanceOrder order{{1, 2, 0}};
  const auto ctrl = train_prioritized(f.specs, f.data, order, f.cost, {}, &trace);
  ASSERT_EQ(trace.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto active = order.ordering[k];
    EXPECT_EQ(trace[k].primitive, active);
    auto partial = ctrl;
    partial.layers.resize(k);
    const auto& data = f.data[active];
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(data.rows()); t += 37) {
      const auto acc = accels_with(3, active, data.xdd(t)(0));
      const VectorXd u0 = f.cost.null_space_control(data.q(t), data.qd(t));
      const VectorXd lower = partial.predict_control(data.q(t), data.qd(t), acc) - u0;
      EXPECT_LT((lower - trace[k].lower.row(t).transpose()).norm(), 1e-9);
      EXPECT_LT((trace[k].offsets.row(t).transpose() - (data.u.row(t).transpose() - u0 - lower)).norm(), 1e-12);
    }
    EXPECT_GT(trace[k].weights.minCoeff(), 0.0);
    EXPECT_LE(trace[k].weights.maxCoeff(), 1.0);
  }
  EXPECT_TRUE(trace[0].lower.isZero());
}

TEST(Stack, NonConflictingTasksAddUp) {
  // At the posture attractor's fixed point the stack reproduces the sum of
  // each task's analytic control.
  Fixture f;
  const auto ctrl = train_prioritized(f.specs, f.data, DominanceOrder{{0, 2, 1}}, f.cost);
  std::mt19937_64 rng(1);
  const VectorXd q = f.arm.rest_posture(), qd = VectorXd::Zero(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<VectorXd> acc{gaussian(rng, 1, 1.0), gaussian(rng, 1, 1.0)};
    acc.push_back(VectorXd::Zero(1));
    VectorXd expected = VectorXd::Zero(4);
    for (std::size_t i = 0; i < 2; ++i) {
      const robot::TaskCommand task{f.maps[i], acc[i]};
      expected += robot::oracle_control(f.arm, q, qd, std::span(&task, 1), f.cost).u;
    }
    EXPECT_LT((ctrl.predict_control(q, qd, acc) - expected).norm(), 1e-2);
  }
}

TEST(Stack, PropertyTopPrimitiveIsExact) {
  // Away from rest the lower layers' posture terms are overridden by the
  // top layer: its task is met exactly while the lower ones drift.
  Fixture f;
  std::mt19937_64 rng(2);
  for (const auto& order : enumerate_orders(3)) {
    const auto ctrl = train_prioritized(f.specs, f.data, order, f.cost);
    const auto top = order.top();
    double lower_violation = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
      const VectorXd q = gaussian(rng, 4, 0.1), qd = gaussian(rng, 4, 0.3);
      const double xdd = gaussian(rng, 1, 2.0)(0);
      const VectorXd u = ctrl.predict_control(q, qd, accels_with(3, top, xdd));
      const robot::TaskCommand task{f.maps[top], VectorXd::Constant(1, xdd)};
      const VectorXd oracle = robot::oracle_control(f.arm, q, qd, std::span(&task, 1), f.cost).u;
      EXPECT_NEAR(f.task_acc(top, q, u), xdd, 1e-2) << order.label(ctrl.names());
      EXPECT_LT((u - oracle).norm(), 1e-2);
      for (std::size_t i = 0; i < 3; ++i)
        if (i != top) lower_violation = std::max(lower_violation, std::abs(f.task_acc(i, q, u)));
    }
    EXPECT_GT(lower_violation, 0.1) << order.label(ctrl.names());
  }
}

TEST(Stack, SwappingOrderSwapsTheExactTask) {
  Fixture f;
  const auto a = train_prioritized(f.specs, f.data, DominanceOrder{{2, 1, 0}}, f.cost);  // px on top
  const auto b = train_prioritized(f.specs, f.data, DominanceOrder{{2, 0, 1}}, f.cost);  // py on top
  const VectorXd q = (VectorXd(4) << 0.1, -0.1, 0.05, 0.0).finished(), qd = VectorXd::Constant(4, 0.2);
  const VectorXd ua = a.predict_control(q, qd, accels_with(3, 0, 0.0));
  const VectorXd ub = b.predict_control(q, qd, accels_with(3, 0, 0.0));
  EXPECT_NEAR(f.task_acc(0, q, ua), 0.0, 1e-2);
  EXPECT_GT(std::abs(f.task_acc(0, q, ub)), 0.1);
  EXPECT_NEAR(f.task_acc(1, q, ub), 0.0, 1e-2);
  EXPECT_GT(std::abs(f.task_acc(1, q, ua)), 0.1);
}

TEST(Stack, ZeroPoliciesGivePostureControl) {
  Fixture f(20);
  auto ctrl = train_prioritized(f.specs, f.data, DominanceOrder{{0, 1, 2}}, f.cost);
  for (auto& layer : ctrl.layers) std::get<learning::LinearPolicy>(layer.policy).theta.setZero();
  const VectorXd q = VectorXd::Constant(4, 0.3), qd = VectorXd::Constant(4, -0.1);
  EXPECT_EQ(ctrl.predict_control(q, qd, accels_with(3, 1, 5.0)), f.cost.null_space_control(q, qd));
}

TEST(Stack, SingleModelSeesEveryAcceleration) {
  Fixture f;
  const auto single = train_single_model(f.specs, f.data, f.cost);
  EXPECT_TRUE(single.single_model());
  EXPECT_EQ(single.label(), "single model");
  ASSERT_EQ(single.layers.size(), 1u);
  EXPECT_EQ(single.layers[0].inputs, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_NO_THROW(single.validate());
  const auto pooled = pool_datasets(f.specs, f.data, f.cost);
  EXPECT_EQ(pooled.phi.rows(), 1200);
  EXPECT_EQ(pooled.phi.cols(), 3 + 8);
  // Rows from px carry zeros in the py and pz slots.
  EXPECT_TRUE(pooled.phi.topRows(400).middleCols(1, 2).isZero());
}

TEST(Stack, KernelLayersMatchLinear) {
  Fixture f(300);
  TrainOptions opt;
  opt.kernel = true;
  const auto k = train_prioritized(f.specs, f.data, DominanceOrder{{0, 1, 2}}, f.cost, opt);
  const auto l = train_prioritized(f.specs, f.data, DominanceOrder{{0, 1, 2}}, f.cost);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd q = gaussian(rng, 4, 0.1), qd = gaussian(rng, 4, 0.3);
    const auto acc = accels_with(3, 2, gaussian(rng, 1, 1.0)(0));
    EXPECT_LT((k.predict_control(q, qd, acc) - l.predict_control(q, qd, acc)).norm(), 1e-2);
  }
}

TEST(Stack, InputValidation) {
  Fixture f(20);
  EXPECT_THROW(train_prioritized(f.specs, {f.data[0], f.data[1]}, DominanceOrder{{0, 1, 2}}, f.cost), InvalidArgument);
  EXPECT_THROW(train_prioritized(f.specs, f.data, DominanceOrder{{0, 1}}, f.cost), InvalidArgument);
  auto wrong = f.specs;
  wrong[1].dim = 2;
  EXPECT_THROW(train_prioritized(wrong, f.data, DominanceOrder{{0, 1, 2}}, f.cost), InvalidArgument);
  const auto ctrl = train_prioritized(f.specs, f.data, DominanceOrder{{0, 1, 2}}, f.cost);
  EXPECT_THROW(ctrl.predict_control(VectorXd::Zero(4), VectorXd::Zero(4), {VectorXd::Zero(1)}), InvalidArgument);
}

TEST(Stack, JsonRoundTrip) {
  Fixture f(50);
  for (const auto& ctrl : {train_prioritized(f.specs, f.data, DominanceOrder{{2, 0, 1}}, f.cost),
                           train_single_model(f.specs, f.data, f.cost)}) {
    const nlohmann::json j = ctrl;
    const auto back = controller_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.label(), ctrl.label());
    EXPECT_EQ(back.cost.alpha, ctrl.cost.alpha);
    const VectorXd q = VectorXd::Constant(4, 0.1), qd = VectorXd::Constant(4, 0.2);
    const std::vector<VectorXd> acc{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 0.5)};
    EXPECT_EQ(back.predict_control(q, qd, acc), ctrl.predict_control(q, qd, acc));
  }
  nlohmann::json j = train_prioritized(f.specs, f.data, DominanceOrder{{2, 0, 1}}, f.cost);
  j["policies"].erase(0);
  EXPECT_THROW(controller_from_json(j), InvalidArgument);
}
