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

#include "prioctl/policy.hpp"

#include "prioctl/io.hpp"
#include "prioctl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

namespace prioctl::learning {

namespace {

bool is_symmetric(const MatrixXd& m, double tol = 1e-10) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool is_spd(const MatrixXd& m) {
  if (!is_symmetric(m)) return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

MatrixXd solve_spd(const MatrixXd& a, const MatrixXd& b, const char* what) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    Eigen::LDLT<MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError(std::string(what) + ": system is not positive definite");
    MatrixXd x = ldlt.solve(b);
    if (!x.allFinite()) throw NumericalError(std::string(what) + ": solve produced non-finite values");
    return x;
  }
  MatrixXd x = llt.solve(b);
  if (!x.allFinite()) throw NumericalError(std::string(what) + ": solve produced non-finite values");
  return x;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double m = *mid;
  if (values.size() % 2 == 0) m = 0.5 * (m + *std::max_element(values.begin(), mid));
  return m;
}

}  // namespace

VectorXd make_features(const VectorXd& xdd, const VectorXd& qd, const VectorXd& q) {
  require(qd.size() == q.size(), "make_features: qd and q differ in length");
  VectorXd phi(xdd.size() + qd.size() + q.size());
  phi << xdd, qd, q;
  return phi;
}

Dataset::Dataset(std::size_t task_dim_, std::size_t joints_, std::size_t rows)
    : task_dim(task_dim_), joints(joints_) {
  phi = MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(task_dim + 2 * joints));
  u = MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(joints));
}

void Dataset::set_row(Eigen::Index row, const VectorXd& xdd_row, const VectorXd& qd_row, const VectorXd& q_row,
                      const VectorXd& u_row) {
  require(xdd_row.size() == static_cast<Eigen::Index>(task_dim) && qd_row.size() == static_cast<Eigen::Index>(joints) &&
              q_row.size() == static_cast<Eigen::Index>(joints) && u_row.size() == static_cast<Eigen::Index>(joints),
          "dataset row dimension mismatch");
  phi.row(row) = make_features(xdd_row, qd_row, q_row).transpose();
  u.row(row) = u_row.transpose();
}

void Dataset::validate() const {
  require(joints > 0, "dataset has zero joints");
  require(phi.cols() == static_cast<Eigen::Index>(feature_dim()), "dataset feature width must be task_dim + 2n");
  require(u.cols() == static_cast<Eigen::Index>(joints), "dataset control width must be n");
  require(phi.rows() == u.rows(), "dataset feature and control row counts differ");
  require(phi.allFinite() && u.allFinite(), "dataset contains non-finite entries");
}

CostModel CostModel::defaults(std::size_t joints, const VectorXd& rest) {
  const auto n = static_cast<Eigen::Index>(joints);
  require(rest.size() == n, "CostModel::defaults: rest posture length mismatch");
  CostModel c;
  c.metric = MatrixXd::Identity(n, n);
  c.alpha = 0.0;
  c.gains.kp = 10.0 * MatrixXd::Identity(n, n);
  c.gains.kd = 2.0 * std::sqrt(10.0) * MatrixXd::Identity(n, n);
  c.gains.rest = rest;
  return c;
}

void CostModel::validate() const {
  const auto n = metric.rows();
  require(n > 0 && metric.cols() == n, "cost metric must be square and non-empty");
  require(is_symmetric(metric), "cost metric must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(metric, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -1e-10, "cost metric must be positive semi-definite");
  require(gains.kp.rows() == n && gains.kd.rows() == n && gains.rest.size() == n, "null-space gains size mismatch");
  require(is_spd(gains.kp), "K_P must be symmetric positive definite");
  require(is_spd(gains.kd), "K_D must be symmetric positive definite");
  require(std::isfinite(alpha), "alpha must be finite");
}

VectorXd CostModel::null_space_control(const VectorXd& q, const VectorXd& qd) const {
  require(q.size() == gains.rest.size() && qd.size() == gains.rest.size(), "null_space_control: state size mismatch");
  return -gains.kd * qd - gains.kp * (q - gains.rest);
}

double CostModel::cost(const VectorXd& offset) const { return offset.dot(metric * offset); }

double auto_alpha(const VectorXd& costs) {
  const double m = median(std::vector<double>(costs.data(), costs.data() + costs.size()));
  return m > 0.0 ? std::log(2.0) / m : 1.0;
}

VectorXd sample_costs(const Dataset& data, const CostModel& cost) {
  data.validate();
  require(cost.joints() == data.joints, "cost model joint count does not match the dataset");
  VectorXd c(static_cast<Eigen::Index>(data.rows()));
  for (Eigen::Index t = 0; t < c.size(); ++t) {
    const VectorXd offset = data.u.row(t).transpose() - cost.null_space_control(data.q(t), data.qd(t));
    c(t) = cost.cost(offset);
  }
  return c;
}

VectorXd weights_from_costs(const VectorXd& costs, double alpha) {
  const double a = alpha > 0.0 ? alpha : auto_alpha(costs);
  return (-a * costs.array()).exp().matrix();
}

VectorXd compute_weights(const Dataset& data, const CostModel& cost) {
  cost.validate();
  return weights_from_costs(sample_costs(data, cost), cost.alpha);
}

FeatureScaling FeatureScaling::from_data(const MatrixXd& phi) {
  FeatureScaling s{kernels::parallel::column_rms(phi)};
  for (Eigen::Index i = 0; i < s.scale.size(); ++i)
    if (!(s.scale(i) > 1e-12)) s.scale(i) = 1.0;
  return s;
}

MatrixXd FeatureScaling::apply(const MatrixXd& phi) const {
  require(phi.cols() == scale.size(), "feature scaling width mismatch");
  return phi * scale.cwiseInverse().asDiagonal();
}

VectorXd FeatureScaling::apply_row(const VectorXd& phi) const {
  require(phi.size() == scale.size(), "feature vector length mismatch");
  return phi.cwiseQuotient(scale);
}

VectorXd LinearPolicy::predict(const VectorXd& phi) const {
  require(phi.size() == theta.rows(), "predict: feature length does not match the policy");
  return theta.transpose() * scaling.apply_row(phi);
}

MatrixXd LinearPolicy::predict_rows(const MatrixXd& phi) const { return scaling.apply(phi) * theta; }

MatrixXd LinearPolicy::raw_theta() const { return scaling.scale.cwiseInverse().asDiagonal() * theta; }

LinearPolicy fit_weighted(const MatrixXd& phi, const MatrixXd& u, const VectorXd& weights, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), "ridge lambda must be positive");
  require(phi.rows() > 0, "cannot fit on an empty dataset");
  require(phi.rows() == u.rows() && weights.size() == phi.rows(), "fit: dimension mismatch between features, controls and weights");
  require(weights.allFinite() && weights.minCoeff() >= 0.0, "fit: weights must be non-negative");
  if (weights.maxCoeff() <= 0.0) throw DegenerateData("fit: every regression weight is zero");

  LinearPolicy policy;
  policy.lambda = lambda;
  policy.scaling = FeatureScaling::from_data(phi);
  const MatrixXd scaled = policy.scaling.apply(phi);
  auto ne = kernels::parallel::weighted_normal_equations(scaled, weights, u);
  ne.gram.diagonal().array() += lambda;
  policy.theta = solve_spd(ne.gram, ne.cross, "weighted ridge regression");
  policy.squared_error = (u - scaled * policy.theta).squaredNorm();
  return policy;
}

LinearPolicy fit_weighted(const Dataset& data, const VectorXd& weights, double lambda) {
  data.validate();
  return fit_weighted(data.phi, data.u, weights, lambda);
}

LinearPolicy fit_plain(const Dataset& data, double lambda) {
  data.validate();
  return fit_weighted(data.phi, data.u, VectorXd::Ones(data.phi.rows()), lambda);
}

VectorXd KernelPolicy::predict(const VectorXd& phi) const {
  require(phi.size() == support.cols(), "kernel predict: feature length does not match the policy");
  const VectorXd k = support * scaling.apply_row(phi);
  return dual.transpose() * k;
}

KernelPolicy fit_kernel(const MatrixXd& phi, const MatrixXd& u, const VectorXd& wu, double regularizer) {
  require(phi.rows() > 0, "cannot fit on an empty dataset");
  require(phi.rows() == u.rows() && wu.size() == phi.rows(), "fit_kernel: dimension mismatch");
  require(regularizer >= 0.0 && std::isfinite(regularizer), "fit_kernel: regularizer must be non-negative");
  require(wu.allFinite() && wu.minCoeff() >= 0.0, "fit_kernel: W_U entries must be non-negative");
  KernelPolicy policy;
  policy.scaling = FeatureScaling::from_data(phi);
  policy.support = policy.scaling.apply(phi);
  policy.wu = wu;
  policy.regularizer = regularizer;
  MatrixXd system = kernels::parallel::linear_kernel(policy.support);
  system.diagonal() += wu;
  system.diagonal().array() += regularizer;
  policy.dual = solve_spd(system, u, "kernel regression");
  return policy;
}

KernelPolicy fit_kernel(const Dataset& data, const CostModel& cost, double regularizer) {
  cost.validate();
  return fit_kernel(data.phi, data.u, sample_costs(data, cost), regularizer);
}

VectorXd woodbury_equivalent_weights(const VectorXd& wu, double lambda, double regularizer) {
  require(lambda > 0.0, "woodbury weights: lambda must be positive");
  const VectorXd denom = wu.array() + regularizer;
  require(denom.minCoeff() > 0.0, "woodbury weights: W_U + regularizer must be positive");
  return (lambda / denom.array()).matrix();
}

void to_json(nlohmann::json& j, const CostModel& c) {
  j = nlohmann::json{{"metric", io::to_json(c.metric)},
                     {"alpha", c.alpha},
                     {"kp", io::to_json(c.gains.kp)},
                     {"kd", io::to_json(c.gains.kd)},
                     {"rest", io::to_json(c.gains.rest)}};
}

void from_json(const nlohmann::json& j, CostModel& c) {
  c.metric = io::matrix_from_json(j.at("metric"));
  c.alpha = j.value("alpha", 0.0);
  c.gains.kp = io::matrix_from_json(j.at("kp"));
  c.gains.kd = io::matrix_from_json(j.at("kd"));
  c.gains.rest = io::vector_from_json(j.at("rest"));
  c.validate();
}

void to_json(nlohmann::json& j, const LinearPolicy& p) {
  j = nlohmann::json{{"kind", "linear"},
                     {"theta", io::to_json(p.theta)},
                     {"lambda", p.lambda},
                     {"feature_scaling", io::to_json(p.scaling.scale)},
                     {"squared_error", p.squared_error}};
}

void from_json(const nlohmann::json& j, LinearPolicy& p) {
  p.theta = io::matrix_from_json(j.at("theta"));
  p.lambda = j.at("lambda").get<double>();
  p.scaling.scale = io::vector_from_json(j.at("feature_scaling"));
  p.squared_error = j.value("squared_error", 0.0);
  require(p.scaling.scale.size() == p.theta.rows(), "policy feature scaling does not match theta");
  require(p.theta.allFinite(), "policy parameters must be finite");
}

void to_json(nlohmann::json& j, const KernelPolicy& p) {
  j = nlohmann::json{{"kind", "kernel"},
                     {"feature_scaling", io::to_json(p.scaling.scale)},
                     {"support", io::to_json(p.support)},
                     {"dual", io::to_json(p.dual)},
                     {"wu", io::to_json(p.wu)},
                     {"regularizer", p.regularizer}};
}

void from_json(const nlohmann::json& j, KernelPolicy& p) {
  p.scaling.scale = io::vector_from_json(j.at("feature_scaling"));
  p.support = io::matrix_from_json(j.at("support"));
  p.dual = io::matrix_from_json(j.at("dual"));
  p.wu = io::vector_from_json(j.at("wu"));
  p.regularizer = j.value("regularizer", 0.0);
  require(p.support.rows() == p.dual.rows() && p.support.cols() == p.scaling.scale.size(),
          "kernel policy shapes are inconsistent");
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  data.validate();
  const auto n = data.joints;
  const auto d = data.task_dim;
  bool first = true;
  auto column = [&](const std::string& name) {
    out << (first ? "" : ",") << name;
    first = false;
  };
  for (std::size_t i = 0; i < n; ++i) column("q" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) column("qd" + std::to_string(i));
  for (std::size_t i = 0; i < d; ++i) column("xdd" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) column("u" + std::to_string(i));
  out << '\n';
  for (Eigen::Index t = 0; t < data.phi.rows(); ++t) {
    std::string line;
    auto emit = [&](double v) {
      if (!line.empty()) line += ',';
      line += io::format_double(v);
    };
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) emit(data.q(t)(i));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) emit(data.qd(t)(i));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) emit(data.xdd(t)(i));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) emit(data.u(t, i));
    out << line << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in, std::size_t task_dim, std::size_t joints) {
  std::string line;
  require(io::next_line(in, line), "dataset CSV is empty");
  const auto header = io::split(line);
  const std::size_t width = 3 * joints + task_dim;
  require(header.size() == width, "dataset CSV header width does not match the sidecar dimensions");
  require(header.front() == "q0" && header.back() == "u" + std::to_string(joints - 1),
          "dataset CSV header must be q0..,qd0..,xdd0..,u0..");
  std::vector<std::vector<double>> rows;
  while (io::next_line(in, line)) {
    const auto fields = io::split(line);
    require(fields.size() == width, "dataset CSV row has the wrong number of fields");
    std::vector<double> row(width);
    std::transform(fields.begin(), fields.end(), row.begin(), io::parse_double);
    rows.push_back(std::move(row));
  }
  Dataset data(task_dim, joints, rows.size());
  const auto n = static_cast<Eigen::Index>(joints);
  const auto d = static_cast<Eigen::Index>(task_dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::Map<const VectorXd> all(rows[r].data(), static_cast<Eigen::Index>(width));
    data.set_row(static_cast<Eigen::Index>(r), all.segment(2 * n, d), all.segment(n, n), all.segment(0, n),
                 all.segment(2 * n + d, n));
  }
  data.validate();
  return data;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  return std::filesystem::path(csv_path.string() + ".json");
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, const nlohmann::json& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  write_dataset_csv(out, data);
  nlohmann::json side = extra.is_object() ? extra : nlohmann::json::object();
  side["task_dim"] = data.task_dim;
  side["joints"] = data.joints;
  side["rows"] = data.rows();
  side["units"] = {{"q", "rad"}, {"qd", "rad/s"}, {"xdd", "task units/s^2"}, {"u", "rad/s^2"}};
  io::write_json_file(sidecar_path(path), side);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto side = io::read_json_file(sidecar_path(path));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return read_dataset_csv(in, side.at("task_dim").get<std::size_t>(), side.at("joints").get<std::size_t>());
}

}  // namespace prioctl::learning
