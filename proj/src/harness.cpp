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

#include "prioctl/harness.hpp"

#include "prioctl/io.hpp"
#include "prioctl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace prioctl::harness {

namespace {

constexpr const char* kResultsHeader =
    "ordering,kind,mean,std,trials,best,failed,missed-ball,workspace-violation,joint-limit,timeout-success,"
    "non-finite,hits,failures";

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string file_stem(std::string label) {
  for (std::size_t pos; (pos = label.find(">=")) != std::string::npos;) label.replace(pos, 2, "_");
  std::replace(label.begin(), label.end(), ' ', '_');
  return label;
}

// One logged control step.
struct Row {
  VectorXd xdd;
  VectorXd qd;
  VectorXd q;
  VectorXd u;
};

}  // namespace

void CollectionConfig::validate() const {
  require(duration > 0.0 && std::isfinite(duration), "collection duration must be positive");
  require(dt > 0.0, "collection dt must be positive");
  require(min_segment > 0.0 && max_segment >= min_segment, "collection segment bounds must satisfy 0 < min <= max");
  require(move_range >= 0.0 && height_range >= 0.0 && pitch_range >= 0.0 && max_goal_velocity >= 0.0,
          "collection ranges must be non-negative");
  require(start_spread >= 0.0 && start_spread <= 1.0, "collection start_spread must lie in [0, 1]");
  require(start_velocity >= 0.0, "collection start_velocity must be non-negative");
}

learning::Dataset collect_primitive_data(const robot::KinematicArm& arm,
                                         const std::vector<bounce::TaskPrimitive>& prims, std::size_t index,
                                         const CollectionConfig& cfg, const bounce::StrategyConfig& strategy,
                                         const learning::CostModel& cost, std::uint64_t seed,
                                         CollectionStats* stats) {
  cfg.validate();
  require(index < prims.size(), "collect: unknown primitive index");
  cost.validate();
  require(cost.joints() == arm.dof(), "collect: cost model does not match the arm");

  const auto target = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  require(target > 0, "collect: duration shorter than one step");
  auto prim = prims[index];
  const auto task_dim = prim.map.dim();
  const auto n = static_cast<Eigen::Index>(arm.dof());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> seg(cfg.min_segment, cfg.max_segment);
  std::uniform_real_distribution<double> gvel(0.0, cfg.max_goal_velocity);

  const robot::ArmState rest{arm.rest_posture(), VectorXd::Zero(n)};
  const VectorXd home = arm.task_position(rest.q, prim.map);
  const VectorXd lo = arm.lower_limits(), hi = arm.upper_limits();
  robot::ArmState state = rest;
  CollectionStats local;
  std::vector<Row> rows;
  rows.reserve(target);
  std::vector<Row> segment;

  while (rows.size() < target) {
    ++local.segments;
    // A runaway generator (every segment rejected) would never terminate.
    if (local.discarded > 1000 && local.discarded * 2 > local.segments)
      throw NumericalError("collect: almost every segment leaves the workspace");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double half = std::min(hi(j) - rest.q(j), rest.q(j) - lo(j));
      state.q(j) = rest.q(j) + cfg.start_spread * half * unit(rng);
      state.qd(j) = cfg.start_velocity * unit(rng);
    }
    const double duration = seg(rng);
    VectorXd goal = home;
    VectorXd goal_vel = VectorXd::Zero(static_cast<Eigen::Index>(task_dim));
    switch (index) {
      case bounce::kMove:
        for (Eigen::Index i = 0; i < goal.size(); ++i) goal(i) += cfg.move_range * unit(rng);
        break;
      case bounce::kHit:
        goal(0) += cfg.height_range * unit(rng);
        goal_vel(0) = gvel(rng);
        break;
      default:
        for (Eigen::Index i = 0; i < goal.size(); ++i) goal(i) += cfg.pitch_range * unit(rng);
        break;
    }
    prim.dmp.retrigger(goal, goal_vel, duration, arm.task_position(state.q, prim.map),
                       arm.jacobian(state.q, prim.map) * state.qd);

    segment.clear();
    bool ok = true;
    const auto steps = std::max<long>(1, std::lround(duration / cfg.dt));
    for (long k = 0; k < steps && ok; ++k) {
      const VectorXd xdd = bounce::step_primitive(prim.dmp, cfg.dt);
      const robot::TaskCommand task{prim.map, xdd};
      const VectorXd u = robot::oracle_control(arm, state.q, state.qd, std::span(&task, 1), cost).u;
      segment.push_back({xdd, state.qd, state.q, u});
      ok = robot::step_dynamics(arm, state, u, cfg.dt) == robot::StepStatus::ok;
      const Vector3d p = arm.forward_kinematics(state.q).position;
      ok = ok && (p.head<2>() - strategy.target_xy).norm() <= strategy.workspace_radius;
    }
    if (!ok) {
      ++local.discarded;
      continue;
    }
    for (auto& r : segment) {
      if (rows.size() == target) break;
      rows.push_back(std::move(r));
    }
  }

  learning::Dataset data(task_dim, arm.dof(), target);
  for (std::size_t t = 0; t < target; ++t) {
    const auto& r = rows[t];
    data.set_row(static_cast<Eigen::Index>(t), r.xdd, r.qd, r.q, r.u);
  }
  if (stats) *stats = local;
  return data;
}

nlohmann::json collection_metadata(const bounce::TaskPrimitive& prim, const CollectionConfig& cfg,
                                   std::uint64_t seed, const CollectionStats& stats) {
  return {{"primitive", prim.name},
          {"task_map", prim.map.spec()},
          {"mode", primitives::to_string(prim.dmp.mode())},
          {"duration", cfg.duration},
          {"dt", cfg.dt},
          {"seed", seed},
          {"segments", stats.segments},
          {"discarded_segments", stats.discarded},
          {"inactive_primitives", "rest output: zero task acceleration"}};
}

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.arm = robot::KinematicArm::reference();
  c.trial = bounce::TrialConfig::for_arm(c.arm);
  c.cost = learning::CostModel::defaults(c.arm.dof(), c.arm.rest_posture());
  return c;
}

std::vector<bounce::TaskPrimitive> ExperimentConfig::primitives() const {
  auto prims = bounce::default_task_primitives(n_basis);
  for (auto& p : prims) {
    const auto it = primitive_overrides.find(p.name);
    if (it == primitive_overrides.end()) continue;
    require(it->second.dof() == p.map.dim(), "primitive '" + p.name + "' has the wrong dimension");
    require(it->second.mode() == p.dmp.mode(), "primitive '" + p.name + "' has the wrong mode");
    p.dmp = it->second;
  }
  return prims;
}

void ExperimentConfig::validate() const {
  require(n_trials >= 1, "n_trials must be at least 1");
  require(n_basis >= 1, "n_basis must be at least 1");
  require(lambda > 0.0, "lambda must be positive");
  require(max_kernel_rows >= 1, "max_kernel_rows must be at least 1");
  require(threads >= 0, "threads must be non-negative");
  collection.validate();
  trial.validate();
  cost.validate();
  require(cost.joints() == arm.dof(), "cost model does not match the arm");
  for (const auto& [name, mp] : primitive_overrides) {
    require(name == "move" || name == "hit" || name == "orient", "unknown primitive '" + name + "'");
    mp.validate();
  }
}

ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c = ExperimentConfig::defaults();
  try {
    require(j.is_object(), "experiment configuration must be a JSON object");
    if (j.contains("arm")) {
      const auto& a = j.at("arm");
      if (a.is_string()) {
        c.arm_file = a.get<std::string>();
        std::filesystem::path p(c.arm_file);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        c.arm = robot::load_arm(p);
      } else {
        c.arm = robot::arm_from_json(a);
      }
    }
    c.trial = bounce::trial_config_from_json(j.value("trial", nlohmann::json::object()),
                                             bounce::TrialConfig::for_arm(c.arm));
    c.cost = learning::CostModel::defaults(c.arm.dof(), c.arm.rest_posture());
    if (j.contains("cost_model")) {
      const auto& cm = j.at("cost_model");
      if (cm.contains("metric")) c.cost.metric = io::matrix_from_json(cm.at("metric"));
      if (cm.contains("kp")) c.cost.gains.kp = io::matrix_from_json(cm.at("kp"));
      if (cm.contains("kd")) c.cost.gains.kd = io::matrix_from_json(cm.at("kd"));
      c.cost.alpha = cm.value("alpha", c.cost.alpha);
    }
    if (j.contains("collection")) {
      const auto& cc = j.at("collection");
      auto& k = c.collection;
      k.duration = cc.value("duration", k.duration);
      k.dt = cc.value("dt", k.dt);
      k.min_segment = cc.value("min_segment", k.min_segment);
      k.max_segment = cc.value("max_segment", k.max_segment);
      k.move_range = cc.value("move_range", k.move_range);
      k.height_range = cc.value("height_range", k.height_range);
      k.max_goal_velocity = cc.value("max_goal_velocity", k.max_goal_velocity);
      k.pitch_range = cc.value("pitch_range", k.pitch_range);
      k.start_spread = cc.value("start_spread", k.start_spread);
      k.start_velocity = cc.value("start_velocity", k.start_velocity);
    }
    c.n_basis = j.value("n_basis", c.n_basis);
    if (j.contains("primitives")) {
      for (const auto& [name, value] : j.at("primitives").items()) {
        primitives::MotorPrimitive mp;
        if (value.is_string()) {
          std::filesystem::path p(value.get<std::string>());
          if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
          primitives::from_json(io::read_json_file(p), mp);
        } else {
          primitives::from_json(value, mp);
        }
        c.primitive_overrides[name] = std::move(mp);
      }
    }
    const auto trials = j.value("n_trials", static_cast<long long>(c.n_trials));
    require(trials >= 1, "n_trials must be at least 1");
    c.n_trials = static_cast<std::size_t>(trials);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.trial_seed = j.value("trial_seed", c.trial_seed);
    c.lambda = j.value("lambda", c.lambda);
    c.kernel = j.value("kernel", c.kernel);
    c.max_kernel_rows = j.value("max_kernel_rows", c.max_kernel_rows);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("experiment configuration: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return experiment_from_json(io::read_json_file(path), path.parent_path());
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json arm;
  robot::to_json(arm, c.arm);
  nlohmann::json trial;
  bounce::to_json(trial, c.trial);
  const auto& k = c.collection;
  j = nlohmann::json{{"arm", c.arm_file.empty() ? arm : nlohmann::json(c.arm_file)},
                     {"trial", trial},
                     {"n_basis", c.n_basis},
                     {"collection",
                      {{"duration", k.duration},
                       {"dt", k.dt},
                       {"min_segment", k.min_segment},
                       {"max_segment", k.max_segment},
                       {"move_range", k.move_range},
                       {"height_range", k.height_range},
                       {"max_goal_velocity", k.max_goal_velocity},
                       {"pitch_range", k.pitch_range},
                       {"start_spread", k.start_spread},
                       {"start_velocity", k.start_velocity}}},
                     {"n_trials", c.n_trials},
                     {"data_seed", c.data_seed},
                     {"trial_seed", c.trial_seed},
                     {"lambda", c.lambda},
                     {"kernel", c.kernel},
                     {"max_kernel_rows", c.max_kernel_rows},
                     {"cost_model",
                      {{"metric", io::to_json(c.cost.metric)},
                       {"alpha", c.cost.alpha},
                       {"kp", io::to_json(c.cost.gains.kp)},
                       {"kd", io::to_json(c.cost.gains.kd)}}}};
  if (!c.primitive_overrides.empty()) {
    nlohmann::json prims = nlohmann::json::object();
    for (const auto& [name, mp] : c.primitive_overrides) primitives::to_json(prims[name], mp);
    j["primitives"] = prims;
  }
}

// ---------------------------------------------------------------------------

std::map<std::string, int> DominanceResult::failure_histogram() const {
  std::map<std::string, int> h;
  for (auto f : bounce::kAllFailures) h[bounce::to_string(f)] = 0;
  for (auto f : failures) ++h[bounce::to_string(f)];
  return h;
}

void DominanceResult::summarize() {
  const auto n = static_cast<double>(hits.size());
  if (hits.empty()) {
    mean = stddev = 0.0;
    return;
  }
  double sum = 0.0;
  for (int h : hits) sum += h;
  mean = sum / n;
  double ss = 0.0;
  for (int h : hits) ss += (h - mean) * (h - mean);
  stddev = hits.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

std::vector<learning::Dataset> collect_all(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto prims = cfg.primitives();
  std::vector<learning::Dataset> out(prims.size());
  for (std::size_t i = 0; i < prims.size(); ++i)
    out[i] = collect_primitive_data(cfg.arm, prims, i, cfg.collection, cfg.trial.strategy, cfg.cost,
                                    cfg.data_seed + i);
  return out;
}

StudyOutput run_dominance_study(const ExperimentConfig& cfg, const std::vector<learning::Dataset>& datasets) {
  cfg.validate();
  kernels::set_thread_count(cfg.threads);
  const auto prims = cfg.primitives();
  const auto specs = bounce::specs_of(prims);
  const auto orders = prioritized::enumerate_orders(prims.size());
  const std::size_t n_rows = orders.size() + 1;
  prioritized::TrainOptions opt;
  opt.lambda = cfg.lambda;
  opt.kernel = cfg.kernel;
  opt.max_kernel_rows = cfg.max_kernel_rows;

  std::vector<DominanceResult> rows(n_rows);
  std::vector<std::optional<prioritized::PrioritizedController>> ctrls(n_rows);
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);

  // Training is cheap next to evaluation and its kernels are already
  // parallel, so rows train one after another.
  for (std::size_t r = 0; r < n_rows; ++r) {
    const bool single = r == orders.size();
    rows[r].single_model = single;
    rows[r].label = single ? "single model" : orders[r].label(names);
    try {
      ctrls[r] = single ? prioritized::train_single_model(specs, datasets, cfg.cost, opt)
                        : prioritized::train_prioritized(specs, datasets, orders[r], cfg.cost, opt);
    } catch (const std::exception& e) {
      rows[r].failed = true;
      rows[r].error = e.what();
    }
    rows[r].hits.assign(cfg.n_trials, 0);
    rows[r].failures.assign(cfg.n_trials, bounce::Failure::missed_ball);
  }

  const auto total = static_cast<long>(n_rows * cfg.n_trials);
  std::vector<std::string> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 1)
  for (long job = 0; job < total; ++job) {
    const auto r = static_cast<std::size_t>(job) / cfg.n_trials;
    const auto k = static_cast<std::size_t>(job) % cfg.n_trials;
    if (!ctrls[r]) continue;
    try {
      const bounce::LearnedController controller(*ctrls[r]);
      const auto res = bounce::run_trial(cfg.arm, controller, prims, cfg.trial, cfg.trial_seed + k);
      rows[r].hits[k] = res.hits;
      rows[r].failures[k] = res.failure;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(job)] = e.what();
    }
  }
  for (long job = 0; job < total; ++job) {
    const auto r = static_cast<std::size_t>(job) / cfg.n_trials;
    if (!errors[static_cast<std::size_t>(job)].empty() && !rows[r].failed) {
      rows[r].failed = true;
      rows[r].error = errors[static_cast<std::size_t>(job)];
    }
  }
  for (auto& row : rows) row.summarize();

  std::vector<std::size_t> idx(n_rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].failed != rows[b].failed) return !rows[a].failed;
    return rows[a].mean > rows[b].mean;
  });
  StudyOutput out;
  bool flagged = false;
  for (auto i : idx) {
    auto row = rows[i];
    if (!flagged && !row.single_model && !row.failed) {
      row.best = true;
      flagged = true;
    }
    out.rows.push_back(std::move(row));
    out.controllers.push_back(ctrls[i] ? *ctrls[i] : prioritized::PrioritizedController{});
  }
  return out;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "table") return ReportFormat::table;
  if (s == "csv") return ReportFormat::csv;
  if (s == "plot-data") return ReportFormat::plot_data;
  throw InvalidArgument("unknown report format '" + s + "' (expected table, csv or plot-data)");
}

void render_report(std::ostream& out, const std::vector<DominanceResult>& rows, ReportFormat format) {
  switch (format) {
    case ReportFormat::table: {
      std::size_t width = 24;
      for (const auto& r : rows) width = std::max(width, r.label.size() + 2);
      auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
      out << pad("Dominance structure") << "Hits (mean+-std)\n";
      for (const auto& r : rows) {
        out << pad(r.label);
        if (r.failed) out << "failed";
        else out << fixed2(r.mean) << "+-" << fixed2(r.stddev) << (r.best ? "  (best)" : "");
        out << '\n';
      }
      break;
    }
    case ReportFormat::csv: {
      out << kResultsHeader << '\n';
      for (const auto& r : rows) {
        out << r.label << ',' << (r.single_model ? "single" : "ordering") << ',' << io::format_double(r.mean) << ','
            << io::format_double(r.stddev) << ',' << r.hits.size() << ',' << (r.best ? 1 : 0) << ','
            << (r.failed ? 1 : 0);
        for (const auto& [name, count] : r.failure_histogram()) {
          (void)name;
          out << ',' << count;
        }
        out << ',';
        for (std::size_t k = 0; k < r.hits.size(); ++k) out << (k ? ";" : "") << r.hits[k];
        out << ',';
        for (std::size_t k = 0; k < r.failures.size(); ++k) out << (k ? ";" : "") << bounce::to_string(r.failures[k]);
        out << '\n';
      }
      break;
    }
    case ReportFormat::plot_data: {
      out << "ordering,trial,hits,failure\n";
      for (const auto& r : rows)
        for (std::size_t k = 0; k < r.hits.size(); ++k)
          out << r.label << ',' << k << ',' << r.hits[k] << ','
              << (k < r.failures.size() ? bounce::to_string(r.failures[k]) : "") << '\n';
      break;
    }
  }
}

std::string render_report(const std::vector<DominanceResult>& rows, ReportFormat format) {
  std::ostringstream os;
  render_report(os, rows, format);
  return os.str();
}

std::vector<DominanceResult> parse_results_csv(std::istream& in) {
  std::string line;
  if (!io::next_line(in, line)) throw InvalidArgument("results: missing header");
  require(line == kResultsHeader, "results: unexpected header");
  std::vector<DominanceResult> rows;
  while (io::next_line(in, line)) {
    const auto f = io::split(line, ',');
    require(f.size() == 14, "results: expected 14 columns");
    DominanceResult r;
    r.label = f[0];
    r.single_model = f[1] == "single";
    r.mean = io::parse_double(f[2]);
    r.stddev = io::parse_double(f[3]);
    const auto n = static_cast<std::size_t>(io::parse_double(f[4]));
    r.best = f[5] == "1";
    r.failed = f[6] == "1";
    if (!f[12].empty())
      for (const auto& h : io::split(f[12], ';')) r.hits.push_back(static_cast<int>(io::parse_double(h)));
    require(r.hits.size() == n, "results: trial count does not match the hit list");
    if (!f[13].empty())
      for (const auto& name : io::split(f[13], ';')) r.failures.push_back(bounce::failure_from_string(name));
    require(r.failures.size() == n, "results: trial count does not match the failure list");
    const auto hist = r.failure_histogram();
    std::size_t col = 7;
    for (const auto& [name, count] : hist)
      require(static_cast<int>(io::parse_double(f[col++])) == count, "results: failure histogram is inconsistent");
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_study(const std::filesystem::path& dir, const ExperimentConfig& cfg, const StudyOutput& study) {
  std::filesystem::create_directories(dir / "controllers");
  io::write_text_file(dir / "results.csv", render_report(study.rows, ReportFormat::csv));
  io::write_text_file(dir / "report.txt", render_report(study.rows, ReportFormat::table));
  io::write_text_file(dir / "plot_data.csv", render_report(study.rows, ReportFormat::plot_data));
  nlohmann::json meta;
  to_json(meta["config"], cfg);
  meta["trials_per_row"] = cfg.n_trials;
  meta["trial_count_note"] = "trials per ordering is a configuration choice";
  meta["rows"] = nlohmann::json::array();
  for (std::size_t i = 0; i < study.rows.size(); ++i) {
    const auto& r = study.rows[i];
    nlohmann::json row{{"label", r.label}, {"failed", r.failed}};
    if (r.failed) row["error"] = r.error;
    if (!study.controllers[i].layers.empty()) {
      const auto file = "controllers/" + file_stem(r.label) + ".json";
      nlohmann::json cj;
      prioritized::to_json(cj, study.controllers[i]);
      io::write_json_file(dir / file, cj);
      row["controller"] = file;
    }
    meta["rows"].push_back(row);
  }
  io::write_json_file(dir / "metadata.json", meta);
}

std::vector<DominanceResult> read_study(const std::filesystem::path& dir) {
  std::ifstream in(dir / "results.csv", std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + (dir / "results.csv").string());
  return parse_results_csv(in);
}

}  // namespace prioctl::harness
