#pragma once

#include <utility>

#include "dbd/image.hpp"
#include "dbd/rng.hpp"

namespace dbd {

/// Stochastic augmentation policy. `strong` is the contrastive-stage recipe
/// (crop-resize, flip, color distortion, grayscale, blur); `standard` is the
/// supervised recipe (crop-resize, flip). Zero-strength ops are skipped, so
/// the identity configuration reproduces the input bit-for-bit.
struct AugmentConfig {
  float crop_scale_min = 1.0f;  // area fraction range for random crop-resize
  float crop_scale_max = 1.0f;
  float flip_prob = 0.0f;
  float brightness = 0.0f;  // color jitter strengths: factor in 1 +/- value
  float contrast = 0.0f;
  float saturation = 0.0f;
  float grayscale_prob = 0.0f;
  float blur_prob = 0.0f;
  float blur_sigma_min = 0.1f;
  float blur_sigma_max = 1.0f;
  enum class Mode { strong, standard } mode = Mode::standard;

  static AugmentConfig identity();
  static AugmentConfig strong_default();
  static AugmentConfig standard_default();
  void validate() const;
};

/// One augmented view. All randomness comes from `rng`; identical
/// (image, config, rng state) triples give identical outputs.
Image augment(const Image& image, const AugmentConfig& config, Rng& rng);

/// Two independently augmented views of one source image, drawn from
/// disjoint sub-streams of `rng`.
std::pair<Image, Image> make_view_pair(const Image& image, const AugmentConfig& config, Rng& rng);

}  // namespace dbd
