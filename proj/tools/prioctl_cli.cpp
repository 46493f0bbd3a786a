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

// prioctl: collect, train, simulate, study, report.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 the run itself
// failed (numerical failure, degenerate data, every study row failed).

#include "prioctl/bounce.hpp"
#include "prioctl/harness.hpp"
#include "prioctl/io.hpp"
#include "prioctl/policy.hpp"
#include "prioctl/prioritized.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace prioctl;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kFailure = 3;

harness::ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? harness::ExperimentConfig::defaults() : harness::load_experiment(path);
}

std::size_t primitive_index(const std::vector<bounce::TaskPrimitive>& prims, const std::string& name) {
  for (std::size_t i = 0; i < prims.size(); ++i)
    if (prims[i].name == name) return i;
  throw InvalidArgument("unknown primitive '" + name + "' (expected move, hit or orient)");
}

int run_collect(const std::string& config, const std::string& name, double duration, std::uint64_t seed,
                const std::string& out) {
  auto cfg = load_config(config);
  cfg.collection.duration = duration;
  cfg.collection.validate();
  const auto prims = cfg.primitives();
  const auto index = primitive_index(prims, name);
  harness::CollectionStats stats;
  const auto data = harness::collect_primitive_data(cfg.arm, prims, index, cfg.collection, cfg.trial.strategy,
                                                    cfg.cost, seed, &stats);
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  learning::save_dataset(path, data, harness::collection_metadata(prims[index], cfg.collection, seed, stats));
  std::cout << "collected " << data.rows() << " rows for " << name << " (" << stats.segments << " segments, "
            << stats.discarded << " discarded) -> " << out << '\n';
  return kOk;
}

int run_train(const std::string& config, const std::string& order_text, const std::string& data_dir,
              const std::string& out) {
  const auto cfg = load_config(config);
  const auto prims = cfg.primitives();
  const auto specs = bounce::specs_of(prims);
  std::vector<learning::Dataset> datasets;
  for (const auto& p : prims) {
    const fs::path file = fs::path(data_dir) / (p.name + ".csv");
    if (!fs::exists(file)) throw InvalidArgument("missing dataset " + file.string());
    datasets.push_back(learning::load_dataset(file));
  }
  prioritized::TrainOptions opt;
  opt.lambda = cfg.lambda;
  opt.kernel = cfg.kernel;
  opt.max_kernel_rows = cfg.max_kernel_rows;
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  const auto ctrl =
      order_text == "single"
          ? prioritized::train_single_model(specs, datasets, cfg.cost, opt)
          : prioritized::train_prioritized(specs, datasets, prioritized::DominanceOrder::parse(order_text, names),
                                           cfg.cost, opt);
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  nlohmann::json j;
  prioritized::to_json(j, ctrl);
  io::write_json_file(path, j);
  std::cout << "trained " << ctrl.label() << " -> " << out << '\n';
  return kOk;
}

int run_simulate(const std::string& config, const std::string& controller, std::size_t trials, std::uint64_t seed) {
  const auto cfg = load_config(config);
  require(trials >= 1, "--trials must be at least 1");
  const auto ctrl = prioritized::controller_from_json(io::read_json_file(controller));
  require(ctrl.joints == cfg.arm.dof(), "controller joint count does not match the arm");
  const auto prims = cfg.primitives();
  const auto specs = bounce::specs_of(prims);
  require(ctrl.primitives.size() == specs.size(), "controller primitives do not match the task primitives");
  for (std::size_t i = 0; i < specs.size(); ++i)
    require(ctrl.primitives[i].name == specs[i].name && ctrl.primitives[i].dim == specs[i].dim,
            "controller primitives do not match the task primitives");

  const bounce::LearnedController learned(ctrl);
  harness::DominanceResult row;
  row.label = ctrl.label();
  row.single_model = ctrl.single_model();
  std::cout << "trial,seed,hits,failure\n";
  for (std::size_t k = 0; k < trials; ++k) {
    const auto r = bounce::run_trial(cfg.arm, learned, prims, cfg.trial, seed + k);
    row.hits.push_back(r.hits);
    row.failures.push_back(r.failure);
    std::cout << k << ',' << seed + k << ',' << r.hits << ',' << bounce::to_string(r.failure) << '\n';
  }
  row.summarize();
  std::cout << '\n';
  harness::render_report(std::cout, {row}, harness::ReportFormat::table);
  return kOk;
}

int run_study(const std::string& config, const std::string& out, int threads) {
  auto cfg = harness::load_experiment(config);
  if (threads >= 0) cfg.threads = threads;
  cfg.validate();
  std::cerr << "collecting " << cfg.collection.duration << " s per primitive\n";
  const auto data = harness::collect_all(cfg);
  std::cerr << "training and evaluating 7 controllers x " << cfg.n_trials << " trials\n";
  const auto study = harness::run_dominance_study(cfg, data);
  harness::write_study(out, cfg, study);
  fs::create_directories(fs::path(out) / "data");
  const auto prims = cfg.primitives();
  for (std::size_t i = 0; i < data.size(); ++i) {
    learning::save_dataset(fs::path(out) / "data" / (prims[i].name + ".csv"), data[i],
                           {{"primitive", prims[i].name}, {"seed", cfg.data_seed + i}});
  }
  harness::render_report(std::cout, study.rows, harness::ReportFormat::table);
  const bool all_failed =
      std::all_of(study.rows.begin(), study.rows.end(), [](const auto& r) { return r.failed; });
  for (const auto& r : study.rows)
    if (r.failed) std::cerr << "row '" << r.label << "' failed: " << r.error << '\n';
  return all_failed ? kFailure : kOk;
}

int run_report(const std::string& in, const std::string& format) {
  const auto fmt = harness::report_format_from_string(format);
  harness::render_report(std::cout, harness::read_study(in), fmt);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning prioritized control of motor primitives"};
  app.require_subcommand(1);
  std::string config;

  auto* collect = app.add_subcommand("collect", "Log one primitive's analytic-controller data");
  std::string prim, out;
  double duration = 30.0;
  std::uint64_t seed = 1;
  collect->add_option("--primitive", prim, "move, hit or orient")->required();
  collect->add_option("--duration", duration, "Seconds of data")->required();
  collect->add_option("--seed", seed, "Random seed")->required();
  collect->add_option("--out", out, "Dataset CSV (a .json sidecar is written next to it)")->required();
  collect->add_option("--config", config, "Experiment configuration (arm, cost model, collection ranges)");

  auto* train = app.add_subcommand("train", "Train a prioritized controller from collected data");
  std::string order, data_dir;
  train->add_option("--order", order, "Comma-separated primitives, highest priority first, or 'single'")->required();
  train->add_option("--data", data_dir, "Directory holding move.csv, hit.csv and orient.csv")->required();
  train->add_option("--out", out, "Controller JSON")->required();
  train->add_option("--config", config, "Experiment configuration");

  auto* simulate = app.add_subcommand("simulate", "Run bouncing trials with a trained controller");
  std::string controller;
  std::size_t trials = 20;
  simulate->add_option("--controller", controller, "Controller JSON")->required();
  simulate->add_option("--trials", trials, "Number of trials")->required();
  simulate->add_option("--seed", seed, "Seed of the first trial")->required();
  simulate->add_option("--config", config, "Experiment configuration");

  auto* study = app.add_subcommand("study", "Collect, train every ordering and the single model, evaluate");
  int threads = -1;
  study->add_option("--config", config, "Experiment configuration")->required();
  study->add_option("--out", out, "Output directory")->required();
  study->add_option("--threads", threads, "OpenMP threads (overrides the configuration; 0 = default)");

  auto* report = app.add_subcommand("report", "Render a study's results");
  std::string in, format = "table";
  report->add_option("--in", in, "Study directory")->required();
  report->add_option("--format", format, "table, csv or plot-data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*collect) return run_collect(config, prim, duration, seed, out);
    if (*train) return run_train(config, order, data_dir, out);
    if (*simulate) return run_simulate(config, controller, trials, seed);
    if (*study) return run_study(config, out, threads);
    if (*report) return run_report(in, format);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kFailure;
  }
  return kInvalid;
}
