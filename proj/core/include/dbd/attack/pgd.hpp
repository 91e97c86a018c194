#pragma once

#include <memory>

#include "dbd/nn/model.hpp"
#include "dbd/triggers.hpp"

namespace dbd {

struct PGDSpec {
  double epsilon = 16.0;   // l-inf radius in 0..255 pixel units
  int steps = 10;
  double step_size = 0.0;  // in [0,1] units; 0 selects epsilon / (4 * steps * 255)

  double resolved_step_size() const {
    return step_size > 0.0 ? step_size : epsilon / (4.0 * std::max(steps, 1) * 255.0);
  }
  void validate() const {
    if (epsilon < 0.0) throw ConfigError("pgd epsilon must be >= 0");
    if (steps < 0) throw ConfigError("pgd steps must be >= 0");
  }
};

/// Untargeted l-inf PGD against the surrogate's cross-entropy: each step
/// moves by step_size * sign(d loss / d input) and projects back into the
/// epsilon/255 ball around the input, intersected with [0, 1].
Image pgd_perturb(nn::Model<float>& surrogate, const Image& image, int label,
                  const PGDSpec& spec);

/// Clean-label generator: adversarially perturb a target-class image, then
/// stamp the visible trigger. Evaluation-time poisoning stamps only.
class LabelConsistentGenerator final : public TriggerGenerator {
public:
  LabelConsistentGenerator(std::shared_ptr<nn::Model<float>> surrogate, PGDSpec pgd,
                           PatchTriggerSpec patch)
      : surrogate_(std::move(surrogate)), pgd_(pgd), patch_(std::move(patch)) {
    if (surrogate_ == nullptr) throw ContractError("label-consistent attack needs a surrogate");
    pgd_.validate();
  }

  Image apply_train(const LabeledSample& sample) const override {
    const Image perturbed = pgd_perturb(*surrogate_, sample.image, sample.label, pgd_);
    return stamp_patch_trigger(perturbed, patch_);
  }
  Image apply_eval(const Image& image) const override {
    return stamp_patch_trigger(image, patch_);
  }
  std::string id() const override { return "label_consistent"; }

private:
  std::shared_ptr<nn::Model<float>> surrogate_;
  PGDSpec pgd_;
  PatchTriggerSpec patch_;
};

}  // namespace dbd
