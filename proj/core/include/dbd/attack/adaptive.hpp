#pragma once

#include <optional>

#include "dbd/dataset.hpp"
#include "dbd/nn/model.hpp"

namespace dbd {

/// Trigger optimization against a known backbone: minimize the mean distance
/// of poisoned-image features to their own center while maximizing the mean
/// distance from that center to the benign class centers (all l2). The
/// default trigger covers the whole image (poisoned images become the trigger
/// itself); an optional sub-rectangle mask restricts the optimized region.
struct AdaptiveAttackSpec {
  int poison_count = 64;  // M: benign images selected for poisoning
  int steps = 100;
  double learning_rate = 0.1;  // Adam
  std::uint64_t seed = 0;

  struct PatchRegion {
    int row = 0, col = 0, height = 0, width = 0;
  };
  std::optional<PatchRegion> patch;  // empty: full-image replacement

  void validate() const {
    if (poison_count < 1) throw ConfigError("adaptive attack needs poison_count >= 1");
    if (steps < 0) throw ConfigError("adaptive attack steps must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("adaptive attack learning_rate must be > 0");
  }
};

struct AdaptiveAttackResult {
  Image trigger;
  std::vector<double> objective_trace;  // objective value at each step
};

/// Runs the optimization. `backbone` provides the feature head; class
/// centers are computed once from the benign dataset before the loop. The
/// trigger is clipped to [0, 1] after every step. Throws ContractError with
/// the step index if the objective turns non-finite.
AdaptiveAttackResult optimize_adaptive_trigger(nn::Model<float>& backbone, const Dataset& benign,
                                               const AdaptiveAttackSpec& spec);

/// One objective evaluation at a given trigger (class centers and the poison
/// pool are rebuilt from the spec). Optionally returns dJ/d trigger.
double adaptive_objective(nn::Model<float>& backbone, const Dataset& benign,
                          const AdaptiveAttackSpec& spec, const Image& trigger,
                          Image* gradient = nullptr);

}  // namespace dbd
