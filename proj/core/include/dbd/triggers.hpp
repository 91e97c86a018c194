#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "dbd/dataset.hpp"
#include "dbd/image.hpp"

namespace dbd {

struct PatchTriggerSpec {
  Image patch;   // fragment stamped over the image; may be empty (no-op)
  int row = 0;   // top-left anchor
  int col = 0;
};

struct BlendTriggerSpec {
  Image trigger;             // full-size pattern
  float blend_ratio = 0.1f;  // scalar mask value in [0, 1]
};

struct WarpSpec {
  int grid_size = 4;        // control points per side
  float strength = 0.5f;    // displacement scale
  float noise_rate = 0.0f;  // fraction of extra noise-mode decoy samples
  std::uint64_t seed = 0;
};

enum class WarpMode { attack, noise };

/// Replaces the patch region with the patch values; everything else is
/// untouched. A zero-size patch is the identity.
Image stamp_patch_trigger(const Image& image, const PatchTriggerSpec& spec);

/// out = (1-lambda) * image + lambda * trigger, clipped to [0, 1].
Image blend_trigger(const Image& image, const BlendTriggerSpec& spec);

/// Elastic warp through a smooth control-grid displacement field. The field
/// is a pure function of (spec, mode, noise_salt); noise mode perturbs it
/// with a fresh seeded uniform component before resampling.
Image wanet_transform(const Image& image, const WarpSpec& spec, WarpMode mode,
                      std::uint64_t noise_salt = 0);

/// Fixed structured full-image pattern used as a blend trigger: a diagonal
/// plaid with channel-offset phases, deterministic for a given shape.
Image make_blend_pattern(int channels, int height, int width);

/// One poisoned-image generator. apply_train builds the training-time poison
/// for a chosen sample; apply_eval builds the inference-time triggered image
/// used by the attack-success metric (for adversarial-perturbation attacks
/// these differ: the perturbation is train-only).
class TriggerGenerator {
public:
  virtual ~TriggerGenerator() = default;
  virtual Image apply_train(const LabeledSample& sample) const = 0;
  virtual Image apply_eval(const Image& image) const = 0;
  virtual std::string id() const = 0;
};

class PatchGenerator final : public TriggerGenerator {
public:
  explicit PatchGenerator(PatchTriggerSpec spec) : spec_(std::move(spec)) {}
  Image apply_train(const LabeledSample& sample) const override {
    return stamp_patch_trigger(sample.image, spec_);
  }
  Image apply_eval(const Image& image) const override { return stamp_patch_trigger(image, spec_); }
  std::string id() const override { return "badnets_patch"; }

private:
  PatchTriggerSpec spec_;
};

class BlendGenerator final : public TriggerGenerator {
public:
  explicit BlendGenerator(BlendTriggerSpec spec) : spec_(std::move(spec)) {}
  Image apply_train(const LabeledSample& sample) const override {
    return blend_trigger(sample.image, spec_);
  }
  Image apply_eval(const Image& image) const override { return blend_trigger(image, spec_); }
  std::string id() const override { return "blended"; }

private:
  BlendTriggerSpec spec_;
};

class WarpGenerator final : public TriggerGenerator {
public:
  explicit WarpGenerator(WarpSpec spec) : spec_(spec) {}
  Image apply_train(const LabeledSample& sample) const override {
    return wanet_transform(sample.image, spec_, WarpMode::attack);
  }
  Image apply_eval(const Image& image) const override {
    return wanet_transform(image, spec_, WarpMode::attack);
  }
  Image apply_noise_decoy(const LabeledSample& sample) const {
    return wanet_transform(sample.image, spec_, WarpMode::noise,
                           static_cast<std::uint64_t>(sample.sample_id));
  }
  float noise_rate() const { return spec_.noise_rate; }
  std::string id() const override { return "wanet"; }

private:
  WarpSpec spec_;
};

/// Full-image replacement: every poisoned sample becomes the trigger itself.
class ImageReplaceGenerator final : public TriggerGenerator {
public:
  explicit ImageReplaceGenerator(Image trigger, std::string id = "image_replace")
      : trigger_(std::move(trigger)), id_(std::move(id)) {}
  Image apply_train(const LabeledSample&) const override { return trigger_; }
  Image apply_eval(const Image&) const override { return trigger_; }
  std::string id() const override { return id_; }

private:
  Image trigger_;
  std::string id_;
};

}  // namespace dbd
