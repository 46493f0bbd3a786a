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

#ifndef PRIOCTL_COMMON_HPP
#define PRIOCTL_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace prioctl {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

/// Simulation and data-collection step (1 kHz).
inline constexpr double kDefaultDt = 1e-3;

/// Thrown for malformed inputs: shape mismatches, out-of-range parameters,
/// unparsable files.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A solve or an integration produced non-finite values or failed to
/// factorize.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The data carries no usable information (e.g. every regression weight is
/// zero).
class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace prioctl

#endif  // PRIOCTL_COMMON_HPP
