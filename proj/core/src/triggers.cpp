#include "dbd/triggers.hpp"

#include <cmath>

#include "dbd/rng.hpp"

namespace dbd {

Image stamp_patch_trigger(const Image& image, const PatchTriggerSpec& spec) {
  const Image& patch = spec.patch;
  if (patch.size() == 0) return image;
  if (patch.channels != image.channels)
    throw ConfigError("patch channel count does not match image");
  if (spec.row < 0 || spec.col < 0 || spec.row + patch.height > image.height ||
      spec.col + patch.width > image.width)
    throw ConfigError("patch does not fit inside the image at its anchor");

  Image out = image;
  for (int c = 0; c < patch.channels; ++c)
    for (int y = 0; y < patch.height; ++y)
      for (int x = 0; x < patch.width; ++x)
        out.at(c, spec.row + y, spec.col + x) = patch.at(c, y, x);
  out.clamp01();
  return out;
}

Image blend_trigger(const Image& image, const BlendTriggerSpec& spec) {
  if (!spec.trigger.same_shape(image))
    throw ConfigError("blend trigger shape does not match image");
  if (spec.blend_ratio < 0.0f || spec.blend_ratio > 1.0f)
    throw ConfigError("blend ratio must lie in [0, 1]");

  const float lambda = spec.blend_ratio;
  Image out = image;
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = (1.0f - lambda) * image.pixels[i] + lambda * spec.trigger.pixels[i];
  out.clamp01();
  return out;
}

namespace {

// Control-grid displacement in pixels, bilinearly upsampled to full
// resolution with corner alignment. Offsets are normalized by their mean
// magnitude so `strength` sets the displacement scale directly.
struct DisplacementField {
  int size = 0;
  std::vector<float> dy, dx;
};

DisplacementField build_field(const WarpSpec& spec, int image_size, WarpMode mode,
                              std::uint64_t noise_salt) {
  const int k = spec.grid_size;
  Rng rng(fold(spec.seed, "warp-field"));
  std::vector<float> cy(static_cast<size_t>(k) * k), cx(cy.size());
  double abs_sum = 0.0;
  for (size_t i = 0; i < cy.size(); ++i) {
    cy[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    cx[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    abs_sum += std::abs(cy[i]) + std::abs(cx[i]);
  }
  const float mean_abs = static_cast<float>(abs_sum / (2.0 * static_cast<double>(cy.size())));
  const float scale = mean_abs > 0.0f
                          ? spec.strength * (static_cast<float>(image_size) / k) * 0.5f / mean_abs
                          : 0.0f;

  DisplacementField field;
  field.size = image_size;
  field.dy.resize(static_cast<size_t>(image_size) * image_size);
  field.dx.resize(field.dy.size());
  const float step = image_size > 1 ? static_cast<float>(k - 1) / (image_size - 1) : 0.0f;
  for (int y = 0; y < image_size; ++y) {
    const float gy = y * step;
    const int g0 = std::min(static_cast<int>(gy), k - 2);
    const float fy = gy - g0;
    for (int x = 0; x < image_size; ++x) {
      const float gx = x * step;
      const int h0 = std::min(static_cast<int>(gx), k - 2);
      const float fx = gx - h0;
      auto lerp_grid = [&](const std::vector<float>& g) {
        const float top = g[g0 * k + h0] * (1 - fx) + g[g0 * k + h0 + 1] * fx;
        const float bot = g[(g0 + 1) * k + h0] * (1 - fx) + g[(g0 + 1) * k + h0 + 1] * fx;
        return top * (1 - fy) + bot * fy;
      };
      const size_t i = static_cast<size_t>(y) * image_size + x;
      field.dy[i] = scale * lerp_grid(cy);
      field.dx[i] = scale * lerp_grid(cx);
    }
  }

  if (mode == WarpMode::noise) {
    Rng noise(fold(fold(spec.seed, "warp-noise"), noise_salt));
    const float amp = spec.strength * 0.5f;
    for (size_t i = 0; i < field.dy.size(); ++i) {
      field.dy[i] += amp * static_cast<float>(noise.uniform(-1.0, 1.0));
      field.dx[i] += amp * static_cast<float>(noise.uniform(-1.0, 1.0));
    }
  }
  return field;
}

}  // namespace

Image wanet_transform(const Image& image, const WarpSpec& spec, WarpMode mode,
                      std::uint64_t noise_salt) {
  if (spec.grid_size < 2) throw ConfigError("warp grid_size must be >= 2");
  if (spec.strength < 0.0f) throw ConfigError("warp strength must be >= 0");
  if (spec.noise_rate < 0.0f || spec.noise_rate > 1.0f)
    throw ConfigError("warp noise_rate must lie in [0, 1]");
  if (image.height != image.width) throw ContractError("warp requires square images");
  if (spec.strength == 0.0f && mode == WarpMode::attack) return image;

  const DisplacementField field = build_field(spec, image.height, mode, noise_salt);
  Image out(image.channels, image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const size_t i = static_cast<size_t>(y) * image.width + x;
      const float sy = static_cast<float>(y) + field.dy[i];
      const float sx = static_cast<float>(x) + field.dx[i];
      for (int c = 0; c < image.channels; ++c) out.at(c, y, x) = sample_bilinear(image, c, sy, sx);
    }
  }
  out.clamp01();
  return out;
}

Image make_blend_pattern(int channels, int height, int width) {
  Image out(channels, height, width);
  for (int c = 0; c < channels; ++c) {
    const float phase = 0.9f * static_cast<float>(c);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float a = std::sin(0.55f * static_cast<float>(x) + phase);
        const float b = std::sin(0.80f * static_cast<float>(y) - phase);
        const float d = std::sin(0.35f * static_cast<float>(x + y));
        out.at(c, y, x) = 0.5f + 0.5f * (0.45f * a + 0.35f * b + 0.20f * d);
      }
  }
  out.clamp01();
  return out;
}

}  // namespace dbd
