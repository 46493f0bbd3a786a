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

// Priority-ordered composition of learned offset controls.
//
// Each layer maps [xdd of its input primitives; qd; q] to a joint
// acceleration offset. The combined law is u = u0(q, qd) + sum of the layer
// outputs. A prioritized stack has one layer per primitive, trained from the
// lowest priority upwards against the residual of everything below it; the
// single-model baseline is one layer fed by every primitive.

#ifndef PRIOCTL_PRIORITIZED_HPP
#define PRIOCTL_PRIORITIZED_HPP

#include "prioctl/common.hpp"
#include "prioctl/policy.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace prioctl::prioritized {

/// Primitive indices, lowest priority first. Textual form lists names
/// highest priority first, e.g. "hit,move,orient" for hit >= move >= orient.
struct DominanceOrder {
  std::vector<std::size_t> ordering;

  std::size_t size() const { return ordering.size(); }
  std::size_t top() const { return ordering.back(); }
  /// Throws InvalidArgument unless `ordering` is a permutation of 0..n-1.
  void validate(std::size_t n) const;

  /// "hit>=move>=orient"
  std::string label(const std::vector<std::string>& names) const;
  /// "hit,move,orient"
  std::string csv(const std::vector<std::string>& names) const;
  static DominanceOrder parse(const std::string& text, const std::vector<std::string>& names);

  friend bool operator==(const DominanceOrder&, const DominanceOrder&) = default;
};

/// All n! orderings, lexicographic in the lowest-first index sequence.
/// Refuses n > 6.
std::vector<DominanceOrder> enumerate_orders(std::size_t n_prim);

using Policy = std::variant<learning::LinearPolicy, learning::KernelPolicy>;

VectorXd predict(const Policy& policy, const VectorXd& phi);

struct Layer {
  std::vector<std::size_t> inputs;  ///< primitives whose xdd feed this layer, in slot order
  Policy policy;
};

struct PrimitiveSpec {
  std::string name;
  std::size_t dim = 0;
};

class PrioritizedController {
 public:
  std::vector<PrimitiveSpec> primitives;
  std::size_t joints = 0;
  learning::CostModel cost;        ///< alpha holds the value used in training
  std::optional<DominanceOrder> order;  ///< empty for the single model
  std::vector<Layer> layers;       ///< training order (lowest priority first)

  bool single_model() const { return !order.has_value(); }
  std::vector<std::string> names() const;
  std::string label() const;

  /// [xdd of the layer inputs; qd; q]. `accels` has one entry per primitive.
  VectorXd layer_features(const Layer& layer, const VectorXd& q, const VectorXd& qd,
                          const std::vector<VectorXd>& accels) const;

  /// u = u0 + sum of layer outputs.
  VectorXd predict_control(const VectorXd& q, const VectorXd& qd, const std::vector<VectorXd>& accels) const;

  /// Policy count, feature dimensions and cost-model shape.
  void validate() const;
};

struct TrainOptions {
  double lambda = learning::kDefaultLambda;
  bool kernel = false;
  /// Kernel layers keep at most this many evenly strided training rows.
  std::size_t max_kernel_rows = 2000;
};

/// Intermediates of one training step, for inspection and tests.
struct LayerTrace {
  std::size_t primitive = 0;
  MatrixXd lower;    ///< sum of lower-layer predictions per row
  MatrixXd offsets;  ///< u - u0 - lower
  VectorXd costs;
  VectorXd weights;
};

/// One dataset per primitive (index = primitive). Each dataset holds only its
/// own primitive's xdd; lower layers see the other primitives at rest (zero
/// task acceleration). When cost.alpha <= 0 a single alpha is resolved from
/// the u - u0 costs of all datasets pooled.
PrioritizedController train_prioritized(const std::vector<PrimitiveSpec>& primitives,
                                        const std::vector<learning::Dataset>& datasets,
                                        const DominanceOrder& order, const learning::CostModel& cost,
                                        const TrainOptions& options = {}, std::vector<LayerTrace>* trace = nullptr);

/// Pooled rows of every dataset with every primitive's xdd slot present
/// (zeros for the inactive ones) and u - u0 as target.
struct PooledData {
  MatrixXd phi;
  MatrixXd offsets;
};
PooledData pool_datasets(const std::vector<PrimitiveSpec>& primitives, const std::vector<learning::Dataset>& datasets,
                         const learning::CostModel& cost);

PrioritizedController train_single_model(const std::vector<PrimitiveSpec>& primitives,
                                         const std::vector<learning::Dataset>& datasets,
                                         const learning::CostModel& cost, const TrainOptions& options = {});

/// alpha for the given cost model: its own value if positive, otherwise
/// ln 2 over the median pooled u - u0 cost.
double resolve_alpha(const std::vector<learning::Dataset>& datasets, const learning::CostModel& cost);

void to_json(nlohmann::json& j, const PrioritizedController& c);
PrioritizedController controller_from_json(const nlohmann::json& j);

}  // namespace prioctl::prioritized

#endif  // PRIOCTL_PRIORITIZED_HPP
