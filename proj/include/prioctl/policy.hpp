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

// Single-primitive operational-space control laws learned from
// demonstrations: ridge regression, cost-weighted ridge regression and its
// kernelized (dual) form.
//
// Features are phi = [xdd_i; qd; q] and controls are joint accelerations.
// Every fit rescales feature columns to unit RMS first; the scaling is kept
// in the policy and applied again at prediction time.

#ifndef PRIOCTL_POLICY_HPP
#define PRIOCTL_POLICY_HPP

#include "prioctl/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace prioctl::learning {

inline constexpr double kDefaultLambda = 1e-6;

/// Concatenates [xdd; qd; q].
VectorXd make_features(const VectorXd& xdd, const VectorXd& qd, const VectorXd& q);

struct Dataset {
  std::size_t task_dim = 0;
  std::size_t joints = 0;
  MatrixXd phi;  ///< rows x (task_dim + 2*joints)
  MatrixXd u;    ///< rows x joints

  Dataset() = default;
  Dataset(std::size_t task_dim, std::size_t joints, std::size_t rows = 0);

  std::size_t rows() const { return static_cast<std::size_t>(phi.rows()); }
  std::size_t feature_dim() const { return task_dim + 2 * joints; }

  auto xdd(Eigen::Index row) const { return phi.row(row).segment(0, static_cast<Eigen::Index>(task_dim)).transpose(); }
  auto qd(Eigen::Index row) const {
    return phi.row(row).segment(static_cast<Eigen::Index>(task_dim), static_cast<Eigen::Index>(joints)).transpose();
  }
  auto q(Eigen::Index row) const {
    return phi.row(row)
        .segment(static_cast<Eigen::Index>(task_dim + joints), static_cast<Eigen::Index>(joints))
        .transpose();
  }

  void set_row(Eigen::Index row, const VectorXd& xdd, const VectorXd& qd, const VectorXd& q, const VectorXd& u_row);

  /// Throws InvalidArgument on shape mismatch or non-finite entries.
  void validate() const;
};

/// Posture-attracting null-space control u0 = -K_D qd - K_P (q - q0).
struct NullSpaceGains {
  MatrixXd kp;
  MatrixXd kd;
  VectorXd rest;
};

struct CostModel {
  MatrixXd metric;     ///< N, symmetric positive semi-definite
  double alpha = 0.0;  ///< exp-transform scale; <= 0 selects ln(2)/median(cost)
  NullSpaceGains gains;

  /// N = I, K_P = 10 I, K_D = 2 sqrt(10) I (critically damped posture
  /// attraction), automatic alpha.
  static CostModel defaults(std::size_t joints, const VectorXd& rest);
  static CostModel defaults(std::size_t joints) { return defaults(joints, VectorXd::Zero(static_cast<Eigen::Index>(joints))); }

  std::size_t joints() const { return static_cast<std::size_t>(metric.rows()); }
  void validate() const;

  VectorXd null_space_control(const VectorXd& q, const VectorXd& qd) const;
  /// offset^T N offset.
  double cost(const VectorXd& offset) const;
};

/// ln(2) / median(costs): the median sample then gets weight 0.5. Falls back
/// to 1 when the median cost is zero.
double auto_alpha(const VectorXd& costs);

/// (u_t - u0_t)^T N (u_t - u0_t) for every row.
VectorXd sample_costs(const Dataset& data, const CostModel& cost);

/// exp(-alpha * c_t), alpha resolved from the costs when cost.alpha <= 0.
VectorXd weights_from_costs(const VectorXd& costs, double alpha);
VectorXd compute_weights(const Dataset& data, const CostModel& cost);

struct FeatureScaling {
  VectorXd scale;  ///< per-column divisor (column RMS, 1 for all-zero columns)

  static FeatureScaling from_data(const MatrixXd& phi);
  static FeatureScaling identity(std::size_t dim) { return {VectorXd::Ones(static_cast<Eigen::Index>(dim))}; }
  MatrixXd apply(const MatrixXd& phi) const;
  VectorXd apply_row(const VectorXd& phi) const;
};

class LinearPolicy {
 public:
  MatrixXd theta;  ///< (feature_dim x outputs), in scaled feature units
  FeatureScaling scaling;
  double lambda = kDefaultLambda;
  double squared_error = 0.0;  ///< unweighted E^2 over the training rows

  std::size_t feature_dim() const { return static_cast<std::size_t>(theta.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(theta.cols()); }

  VectorXd predict(const VectorXd& phi) const;
  MatrixXd predict_rows(const MatrixXd& phi) const;
  /// Parameters acting on raw (unscaled) features.
  MatrixXd raw_theta() const;
};

/// theta = (Phi^T Phi + lambda I)^-1 Phi^T U.
LinearPolicy fit_plain(const Dataset& data, double lambda = kDefaultLambda);

/// theta = (Phi^T W Phi + lambda I)^-1 Phi^T W U.
LinearPolicy fit_weighted(const Dataset& data, const VectorXd& weights, double lambda = kDefaultLambda);
LinearPolicy fit_weighted(const MatrixXd& phi, const MatrixXd& u, const VectorXd& weights,
                          double lambda = kDefaultLambda);

/// Dual form u(s) = k(s)^T (K + W_U)^-1 U with the linear kernel on scaled
/// features, K = Phi Phi^T and W_U = diag(cost_t) + regularizer * I.
class KernelPolicy {
 public:
  FeatureScaling scaling;
  MatrixXd support;  ///< scaled training features (rows x feature_dim)
  MatrixXd dual;     ///< (K + W_U)^-1 U
  VectorXd wu;       ///< diagonal of W_U without the regularizer
  double regularizer = 0.0;

  std::size_t feature_dim() const { return static_cast<std::size_t>(support.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(dual.cols()); }
  VectorXd predict(const VectorXd& phi) const;
};

KernelPolicy fit_kernel(const Dataset& data, const CostModel& cost, double regularizer);
KernelPolicy fit_kernel(const MatrixXd& phi, const MatrixXd& u, const VectorXd& wu, double regularizer);

/// Weights w_t = lambda / (wu_t + regularizer). With these weights and the
/// same lambda, fit_weighted predicts exactly what fit_kernel predicts with
/// W_U = diag(wu) + regularizer I (push-through identity).
VectorXd woodbury_equivalent_weights(const VectorXd& wu, double lambda, double regularizer);

void to_json(nlohmann::json& j, const CostModel& c);
void from_json(const nlohmann::json& j, CostModel& c);
void to_json(nlohmann::json& j, const LinearPolicy& p);
void from_json(const nlohmann::json& j, LinearPolicy& p);
void to_json(nlohmann::json& j, const KernelPolicy& p);
void from_json(const nlohmann::json& j, KernelPolicy& p);

/// CSV columns q0..,qd0..,xdd0..,u0..
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, std::size_t task_dim, std::size_t joints);

/// Writes `<path>` (CSV) and `<path>.json` (dimensions, units and `extra`).
void save_dataset(const std::filesystem::path& path, const Dataset& data, const nlohmann::json& extra);
Dataset load_dataset(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace prioctl::learning

#endif  // PRIOCTL_POLICY_HPP
