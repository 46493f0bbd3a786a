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

#include "prioctl/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace prioctl::prioritized {

namespace {

constexpr std::size_t kMaxPrimitives = 6;
// Kernel layers turn a weight w into W_U = lambda / w; tiny weights are
// clamped so the system stays finite.
constexpr double kMaxKernelPenalty = 1e12;

std::size_t feature_dim(const std::vector<PrimitiveSpec>& prims, const std::vector<std::size_t>& inputs,
                        std::size_t joints) {
  std::size_t d = 2 * joints;
  for (auto i : inputs) d += prims[i].dim;
  return d;
}

void check_datasets(const std::vector<PrimitiveSpec>& prims, const std::vector<learning::Dataset>& datasets,
                    const learning::CostModel& cost) {
  require(!prims.empty(), "at least one primitive is required");
  require(datasets.size() == prims.size(), "one dataset per primitive is required");
  cost.validate();
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const auto& d = datasets[i];
    require(d.rows() > 0, "dataset for primitive '" + prims[i].name + "' is empty");
    d.validate();
    require(d.task_dim == prims[i].dim, "dataset for primitive '" + prims[i].name + "' has the wrong task dimension");
    require(d.joints == cost.joints(), "dataset for primitive '" + prims[i].name + "' has the wrong joint count");
  }
}

// Features of `layer` evaluated on the rows of dataset `active`: the active
// primitive's xdd in its slot (if the layer reads it), zeros elsewhere.
MatrixXd layer_rows(const std::vector<PrimitiveSpec>& prims, const std::vector<std::size_t>& inputs,
                    const learning::Dataset& data, std::size_t active) {
  const auto n = static_cast<Eigen::Index>(data.joints);
  const auto rows = static_cast<Eigen::Index>(data.rows());
  const auto task = static_cast<Eigen::Index>(data.task_dim);
  MatrixXd phi = MatrixXd::Zero(rows, static_cast<Eigen::Index>(feature_dim(prims, inputs, data.joints)));
  Eigen::Index col = 0;
  for (auto i : inputs) {
    if (i == active) phi.middleCols(col, task) = data.phi.leftCols(task);
    col += static_cast<Eigen::Index>(prims[i].dim);
  }
  phi.middleCols(col, 2 * n) = data.phi.middleCols(task, 2 * n);
  return phi;
}

MatrixXd predict_rows(const Policy& policy, const MatrixXd& phi) {
  if (const auto* lin = std::get_if<learning::LinearPolicy>(&policy)) return lin->predict_rows(phi);
  const auto& ker = std::get<learning::KernelPolicy>(policy);
  MatrixXd out(phi.rows(), static_cast<Eigen::Index>(ker.output_dim()));
  for (Eigen::Index t = 0; t < phi.rows(); ++t) out.row(t) = ker.predict(phi.row(t).transpose()).transpose();
  return out;
}

MatrixXd null_space_rows(const learning::Dataset& data, const learning::CostModel& cost) {
  MatrixXd u0(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(data.joints));
  for (Eigen::Index t = 0; t < u0.rows(); ++t)
    u0.row(t) = cost.null_space_control(data.q(t), data.qd(t)).transpose();
  return u0;
}

VectorXd row_costs(const MatrixXd& offsets, const MatrixXd& metric) {
  return (offsets * metric).cwiseProduct(offsets).rowwise().sum();
}

Policy fit_layer(const MatrixXd& phi, const MatrixXd& offsets, const VectorXd& weights, const TrainOptions& opt) {
  if (!opt.kernel) return learning::fit_weighted(phi, offsets, weights, opt.lambda);
  if (weights.maxCoeff() <= 0.0) throw DegenerateData("fit: every regression weight is zero");
  const auto rows = phi.rows();
  const auto keep = std::min<Eigen::Index>(rows, static_cast<Eigen::Index>(std::max<std::size_t>(1, opt.max_kernel_rows)));
  MatrixXd p(keep, phi.cols()), u(keep, offsets.cols());
  VectorXd wu(keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    const Eigen::Index t = k * rows / keep;
    p.row(k) = phi.row(t);
    u.row(k) = offsets.row(t);
    wu(k) = weights(t) > 0.0 ? std::min(opt.lambda / weights(t), kMaxKernelPenalty) : kMaxKernelPenalty;
  }
  return learning::fit_kernel(p, u, wu, 0.0);
}

}  // namespace

void DominanceOrder::validate(std::size_t n) const {
  require(ordering.size() == n, "dominance order must list every primitive exactly once");
  std::vector<bool> seen(n, false);
  for (auto i : ordering) {
    require(i < n && !seen[i], "dominance order must be a permutation of the primitives");
    seen[i] = true;
  }
}

std::string DominanceOrder::label(const std::vector<std::string>& names) const {
  std::string out;
  for (auto it = ordering.rbegin(); it != ordering.rend(); ++it) {
    if (!out.empty()) out += ">=";
    out += names.at(*it);
  }
  return out;
}

std::string DominanceOrder::csv(const std::vector<std::string>& names) const {
  std::string out;
  for (auto it = ordering.rbegin(); it != ordering.rend(); ++it) {
    if (!out.empty()) out += ',';
    out += names.at(*it);
  }
  return out;
}

DominanceOrder DominanceOrder::parse(const std::string& text, const std::vector<std::string>& names) {
  std::string normalized = text;
  for (std::size_t pos; (pos = normalized.find(">=")) != std::string::npos;) normalized.replace(pos, 2, ",");
  DominanceOrder order;
  for (const auto& part : io::split(normalized, ',')) {
    const auto it = std::find(names.begin(), names.end(), part);
    require(it != names.end(), "unknown primitive '" + part + "' in ordering '" + text + "'");
    order.ordering.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  std::reverse(order.ordering.begin(), order.ordering.end());
  order.validate(names.size());
  return order;
}

std::vector<DominanceOrder> enumerate_orders(std::size_t n_prim) {
  require(n_prim >= 1, "enumerate_orders: need at least one primitive");
  if (n_prim > kMaxPrimitives)
    throw InvalidArgument("enumerate_orders: " + std::to_string(n_prim) +
                          " primitives would need n! orderings; exhaustive search is limited to 6 primitives (720)");
  std::vector<std::size_t> perm(n_prim);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<DominanceOrder> out;
  do out.push_back({perm});
  while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

VectorXd predict(const Policy& policy, const VectorXd& phi) {
  return std::visit([&](const auto& p) { return VectorXd(p.predict(phi)); }, policy);
}

std::vector<std::string> PrioritizedController::names() const {
  std::vector<std::string> out;
  for (const auto& p : primitives) out.push_back(p.name);
  return out;
}

std::string PrioritizedController::label() const { return order ? order->label(names()) : "single model"; }

VectorXd PrioritizedController::layer_features(const Layer& layer, const VectorXd& q, const VectorXd& qd,
                                               const std::vector<VectorXd>& accels) const {
  VectorXd phi(static_cast<Eigen::Index>(feature_dim(primitives, layer.inputs, joints)));
  Eigen::Index col = 0;
  for (auto i : layer.inputs) {
    const auto d = static_cast<Eigen::Index>(primitives[i].dim);
    phi.segment(col, d) = accels[i];
    col += d;
  }
  const auto n = static_cast<Eigen::Index>(joints);
  phi.segment(col, n) = qd;
  phi.segment(col + n, n) = q;
  return phi;
}

VectorXd PrioritizedController::predict_control(const VectorXd& q, const VectorXd& qd,
                                                const std::vector<VectorXd>& accels) const {
  const auto n = static_cast<Eigen::Index>(joints);
  require(q.size() == n && qd.size() == n, "predict_control: state size mismatch");
  require(accels.size() == primitives.size(), "predict_control: one task acceleration per primitive is required");
  for (std::size_t i = 0; i < accels.size(); ++i)
    require(accels[i].size() == static_cast<Eigen::Index>(primitives[i].dim),
            "predict_control: acceleration for primitive '" + primitives[i].name + "' has the wrong size");
  VectorXd u = cost.null_space_control(q, qd);
  for (const auto& layer : layers) u += predict(layer.policy, layer_features(layer, q, qd, accels));
  return u;
}

void PrioritizedController::validate() const {
  require(!primitives.empty(), "controller has no primitives");
  require(cost.joints() == joints, "controller cost model does not match the joint count");
  if (order) {
    order->validate(primitives.size());
    require(layers.size() == primitives.size(), "controller needs one policy per primitive");
    for (std::size_t k = 0; k < layers.size(); ++k)
      require(layers[k].inputs == std::vector<std::size_t>{order->ordering[k]},
              "controller layer inputs do not follow the dominance order");
  } else {
    require(layers.size() == 1, "single model controller has exactly one policy");
  }
  for (const auto& layer : layers) {
    for (auto i : layer.inputs) require(i < primitives.size(), "controller layer refers to an unknown primitive");
    const auto expect = feature_dim(primitives, layer.inputs, joints);
    const auto [fdim, odim] = std::visit(
        [](const auto& p) { return std::pair{p.feature_dim(), p.output_dim()}; }, layer.policy);
    require(fdim == expect, "policy feature dimension does not match its primitives");
    require(odim == joints, "policy output dimension does not match the joint count");
  }
}

double resolve_alpha(const std::vector<learning::Dataset>& datasets, const learning::CostModel& cost) {
  if (cost.alpha > 0.0) return cost.alpha;
  std::vector<double> all;
  for (const auto& d : datasets) {
    const VectorXd c = learning::sample_costs(d, cost);
    all.insert(all.end(), c.data(), c.data() + c.size());
  }
  return learning::auto_alpha(Eigen::Map<const VectorXd>(all.data(), static_cast<Eigen::Index>(all.size())));
}

PrioritizedController train_prioritized(const std::vector<PrimitiveSpec>& primitives,
                                        const std::vector<learning::Dataset>& datasets,
                                        const DominanceOrder& order, const learning::CostModel& cost,
                                        const TrainOptions& options, std::vector<LayerTrace>* trace) {
  check_datasets(primitives, datasets, cost);
  order.validate(primitives.size());

  PrioritizedController ctrl;
  ctrl.primitives = primitives;
  ctrl.joints = cost.joints();
  ctrl.cost = cost;
  ctrl.cost.alpha = resolve_alpha(datasets, cost);
  ctrl.order = order;
  if (trace) trace->clear();

  for (auto active : order.ordering) {
    const auto& data = datasets[active];
    MatrixXd lower = MatrixXd::Zero(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(data.joints));
    for (const auto& layer : ctrl.layers)
      lower += predict_rows(layer.policy, layer_rows(primitives, layer.inputs, data, active));
    const MatrixXd offsets = data.u - null_space_rows(data, cost) - lower;
    const VectorXd costs = row_costs(offsets, cost.metric);
    const VectorXd weights = learning::weights_from_costs(costs, ctrl.cost.alpha);

    Layer layer{{active}, learning::LinearPolicy{}};
    layer.policy = fit_layer(layer_rows(primitives, layer.inputs, data, active), offsets, weights, options);
    ctrl.layers.push_back(std::move(layer));
    if (trace) trace->push_back({active, lower, offsets, costs, weights});
  }
  return ctrl;
}

PooledData pool_datasets(const std::vector<PrimitiveSpec>& primitives, const std::vector<learning::Dataset>& datasets,
                         const learning::CostModel& cost) {
  check_datasets(primitives, datasets, cost);
  std::vector<std::size_t> all(primitives.size());
  std::iota(all.begin(), all.end(), 0);
  Eigen::Index total = 0;
  for (const auto& d : datasets) total += static_cast<Eigen::Index>(d.rows());
  PooledData pooled{MatrixXd(total, static_cast<Eigen::Index>(feature_dim(primitives, all, cost.joints()))),
                    MatrixXd(total, static_cast<Eigen::Index>(cost.joints()))};
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto rows = static_cast<Eigen::Index>(datasets[i].rows());
    pooled.phi.middleRows(row, rows) = layer_rows(primitives, all, datasets[i], i);
    pooled.offsets.middleRows(row, rows) = datasets[i].u - null_space_rows(datasets[i], cost);
    row += rows;
  }
  return pooled;
}

PrioritizedController train_single_model(const std::vector<PrimitiveSpec>& primitives,
                                         const std::vector<learning::Dataset>& datasets,
                                         const learning::CostModel& cost, const TrainOptions& options) {
  const PooledData pooled = pool_datasets(primitives, datasets, cost);
  PrioritizedController ctrl;
  ctrl.primitives = primitives;
  ctrl.joints = cost.joints();
  ctrl.cost = cost;
  ctrl.cost.alpha = resolve_alpha(datasets, cost);
  Layer layer{std::vector<std::size_t>(primitives.size()), learning::LinearPolicy{}};
  std::iota(layer.inputs.begin(), layer.inputs.end(), 0);
  const VectorXd weights = learning::weights_from_costs(row_costs(pooled.offsets, cost.metric), ctrl.cost.alpha);
  layer.policy = fit_layer(pooled.phi, pooled.offsets, weights, options);
  ctrl.layers.push_back(std::move(layer));
  return ctrl;
}

void to_json(nlohmann::json& j, const PrioritizedController& c) {
  const auto names = c.names();
  nlohmann::json dims = nlohmann::json::object();
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : c.primitives) {
    dims[p.name] = p.dim;
    prims.push_back(p.name);
  }
  nlohmann::json policies = nlohmann::json::array();
  for (const auto& layer : c.layers) {
    nlohmann::json inputs = nlohmann::json::array();
    for (auto i : layer.inputs) inputs.push_back(names[i]);
    nlohmann::json pj;
    std::visit([&](const auto& p) { learning::to_json(pj, p); }, layer.policy);
    policies.push_back({{"inputs", inputs}, {"policy", pj}});
  }
  j = nlohmann::json{{"order", c.order ? nlohmann::json(c.order->csv(names)) : nlohmann::json("single")},
                     {"primitives", prims},
                     {"primitive_dims", dims},
                     {"joints", c.joints},
                     {"policies", policies}};
  learning::to_json(j["cost_model"], c.cost);
}

PrioritizedController controller_from_json(const nlohmann::json& j) {
  try {
    PrioritizedController c;
    const auto& dims = j.at("primitive_dims");
    for (const auto& name : j.at("primitives")) {
      const auto n = name.get<std::string>();
      c.primitives.push_back({n, dims.at(n).get<std::size_t>()});
    }
    const auto names = c.names();
    c.joints = j.at("joints").get<std::size_t>();
    learning::from_json(j.at("cost_model"), c.cost);
    const auto order = j.at("order").get<std::string>();
    if (order != "single") c.order = DominanceOrder::parse(order, names);
    for (const auto& pj : j.at("policies")) {
      Layer layer{{}, learning::LinearPolicy{}};
      for (const auto& in : pj.at("inputs")) {
        const auto it = std::find(names.begin(), names.end(), in.get<std::string>());
        require(it != names.end(), "policy input refers to an unknown primitive");
        layer.inputs.push_back(static_cast<std::size_t>(it - names.begin()));
      }
      const auto& body = pj.at("policy");
      const auto kind = body.value("kind", std::string("linear"));
      if (kind == "linear") {
        learning::LinearPolicy p;
        learning::from_json(body, p);
        layer.policy = std::move(p);
      } else if (kind == "kernel") {
        learning::KernelPolicy p;
        learning::from_json(body, p);
        layer.policy = std::move(p);
      } else {
        throw InvalidArgument("unknown policy kind '" + kind + "'");
      }
      c.layers.push_back(std::move(layer));
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("controller description: ") + e.what());
  }
}

}  // namespace prioctl::prioritized
