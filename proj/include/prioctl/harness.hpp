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

// Experiment driver: per-primitive data collection with the analytic
// controller, training of every dominance ordering plus the pooled single
// model, seeded bouncing trials and report rendering.

#ifndef PRIOCTL_HARNESS_HPP
#define PRIOCTL_HARNESS_HPP

#include "prioctl/bounce.hpp"
#include "prioctl/common.hpp"
#include "prioctl/policy.hpp"
#include "prioctl/prioritized.hpp"
#include "prioctl/robot.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace prioctl::harness {

struct CollectionConfig {
  double duration = 30.0;  ///< seconds of kept data per primitive
  double dt = kDefaultDt;
  double min_segment = 0.3;
  double max_segment = 0.7;
  double move_range = 0.15;       ///< horizontal goal offset, m
  double height_range = 0.05;     ///< vertical goal offset, m
  double max_goal_velocity = 1.0; ///< hit goal velocity drawn from [0, this]
  double pitch_range = 0.3;       ///< rad
  /// Each segment starts from rest plus a uniform joint offset of up to this
  /// fraction of the joint's half range, and a uniform joint velocity of up
  /// to start_velocity. Without it joints outside the active task never
  /// leave rest and their feedback terms cannot be identified.
  double start_spread = 0.1;
  double start_velocity = 0.2;

  void validate() const;
};

struct CollectionStats {
  std::size_t segments = 0;
  std::size_t discarded = 0;
};

/// Runs only primitive `index` on the analytic controller (its task alone,
/// posture control in the null space) through random goal segments, each
/// from a random start state, and logs (xdd, qd, q, u) at every step. Segments that hit a joint limit or leave
/// the workspace are dropped and the arm restarts from rest. Exactly
/// round(duration / dt) rows are returned.
learning::Dataset collect_primitive_data(const robot::KinematicArm& arm,
                                         const std::vector<bounce::TaskPrimitive>& prims, std::size_t index,
                                         const CollectionConfig& cfg, const bounce::StrategyConfig& strategy,
                                         const learning::CostModel& cost, std::uint64_t seed,
                                         CollectionStats* stats = nullptr);

/// Sidecar fields written next to a collected dataset.
nlohmann::json collection_metadata(const bounce::TaskPrimitive& prim, const CollectionConfig& cfg,
                                   std::uint64_t seed, const CollectionStats& stats);

struct ExperimentConfig {
  robot::KinematicArm arm = robot::KinematicArm::reference();
  std::string arm_file;  ///< empty for the built-in reference arm
  bounce::TrialConfig trial;
  std::size_t n_basis = 10;
  /// Replacement DMPs by primitive name (weights, gains, basis); the task
  /// map and mode of each primitive stay fixed.
  std::map<std::string, primitives::MotorPrimitive> primitive_overrides;
  CollectionConfig collection;
  std::size_t n_trials = 20;
  std::uint64_t data_seed = 1;
  std::uint64_t trial_seed = 1000;
  double lambda = learning::kDefaultLambda;
  learning::CostModel cost;
  bool kernel = false;
  std::size_t max_kernel_rows = 2000;
  int threads = 0;  ///< 0 keeps the OpenMP default

  static ExperimentConfig defaults();
  std::vector<bounce::TaskPrimitive> primitives() const;
  void validate() const;
};

/// Relative arm paths resolve against `base_dir`. Missing fields keep their
/// defaults. Throws InvalidArgument.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const ExperimentConfig& c);

struct DominanceResult {
  std::string label;  ///< "hit>=move>=orient" or "single model"
  bool single_model = false;
  std::vector<int> hits;
  std::vector<bounce::Failure> failures;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation
  bool best = false;
  bool failed = false;  ///< training or evaluation raised
  std::string error;

  std::map<std::string, int> failure_histogram() const;
  /// Recomputes mean and stddev from `hits`.
  void summarize();
};

struct StudyOutput {
  std::vector<DominanceResult> rows;  ///< sorted by mean hits, descending
  std::vector<prioritized::PrioritizedController> controllers;  ///< same order as rows (empty when failed)
};

/// One dataset per primitive, each from its own seed derived from data_seed.
std::vector<learning::Dataset> collect_all(const ExperimentConfig& cfg);

/// Trains all n! orderings and the single model and runs n_trials seeded
/// trials on each. Trials fan out over OpenMP; results are reduced by row
/// then trial index, so the output does not depend on the thread count.
StudyOutput run_dominance_study(const ExperimentConfig& cfg, const std::vector<learning::Dataset>& datasets);

enum class ReportFormat { table, csv, plot_data };
ReportFormat report_format_from_string(const std::string& s);

void render_report(std::ostream& out, const std::vector<DominanceResult>& rows, ReportFormat format);
std::string render_report(const std::vector<DominanceResult>& rows, ReportFormat format);

/// Inverse of the csv report.
std::vector<DominanceResult> parse_results_csv(std::istream& in);

/// Writes results.csv, report.txt, plot_data.csv, metadata.json and the
/// trained controllers under `dir`.
void write_study(const std::filesystem::path& dir, const ExperimentConfig& cfg, const StudyOutput& study);
std::vector<DominanceResult> read_study(const std::filesystem::path& dir);

}  // namespace prioctl::harness

#endif  // PRIOCTL_HARNESS_HPP
