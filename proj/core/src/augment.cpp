#include "dbd/augment.hpp"

#include <cmath>
#include <vector>

namespace dbd {

AugmentConfig AugmentConfig::identity() { return AugmentConfig{}; }

AugmentConfig AugmentConfig::strong_default() {
  AugmentConfig c;
  c.crop_scale_min = 0.3f;
  c.crop_scale_max = 1.0f;
  c.flip_prob = 0.5f;
  c.brightness = 0.4f;
  c.contrast = 0.4f;
  c.saturation = 0.4f;
  c.grayscale_prob = 0.1f;
  c.blur_prob = 0.3f;
  c.blur_sigma_min = 0.1f;
  c.blur_sigma_max = 0.8f;
  c.mode = Mode::strong;
  return c;
}

AugmentConfig AugmentConfig::standard_default() {
  AugmentConfig c;
  c.crop_scale_min = 0.64f;
  c.crop_scale_max = 1.0f;
  c.flip_prob = 0.5f;
  c.mode = Mode::standard;
  return c;
}

void AugmentConfig::validate() const {
  auto prob_ok = [](float p) { return p >= 0.0f && p <= 1.0f; };
  if (!prob_ok(flip_prob) || !prob_ok(grayscale_prob) || !prob_ok(blur_prob))
    throw ConfigError("augmentation probabilities must lie in [0, 1]");
  if (crop_scale_min <= 0.0f || crop_scale_max > 1.0f || crop_scale_min > crop_scale_max)
    throw ConfigError("crop scale range must satisfy 0 < min <= max <= 1");
  if (brightness < 0.0f || contrast < 0.0f || saturation < 0.0f)
    throw ConfigError("color jitter strengths must be >= 0");
  if (blur_sigma_min <= 0.0f || blur_sigma_min > blur_sigma_max)
    throw ConfigError("blur sigma range must satisfy 0 < min <= max");
}

namespace {

Image crop_resize(const Image& img, int side, int top, int left) {
  Image out(img.channels, img.height, img.width);
  const float sy = static_cast<float>(side) / static_cast<float>(img.height);
  const float sx = static_cast<float>(side) / static_cast<float>(img.width);
  for (int y = 0; y < img.height; ++y) {
    const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f + static_cast<float>(top);
    for (int x = 0; x < img.width; ++x) {
      const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f + static_cast<float>(left);
      for (int c = 0; c < img.channels; ++c) out.at(c, y, x) = sample_bilinear(img, c, src_y, src_x);
    }
  }
  return out;
}

void flip_horizontal(Image& img) {
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width / 2; ++x)
        std::swap(img.at(c, y, x), img.at(c, y, img.width - 1 - x));
}

int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

void gaussian_blur(Image& img, float sigma) {
  const int radius = static_cast<int>(std::ceil(3.0f * sigma));
  if (radius < 1) return;
  std::vector<float> kernel(static_cast<size_t>(2 * radius + 1));
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] =
        std::exp(-static_cast<float>(i * i) / (2.0f * sigma * sigma));
    sum += kernel[static_cast<size_t>(i + radius)];
  }
  for (float& k : kernel) k /= sum;

  Image tmp = img;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 img.at(c, y, reflect_index(x + i, img.width));
        tmp.at(c, y, x) = acc;
      }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 tmp.at(c, reflect_index(y + i, img.height), x);
        img.at(c, y, x) = acc;
      }
  }
}

}  // namespace

Image augment(const Image& image, const AugmentConfig& config, Rng& rng) {
  config.validate();
  Image out = image;

  if (config.crop_scale_min < 1.0f || config.crop_scale_max < 1.0f) {
    const double area = rng.uniform(config.crop_scale_min, config.crop_scale_max);
    const int full = image.height;
    const int side =
        std::clamp(static_cast<int>(std::lround(full * std::sqrt(area))), 1, full);
    const int top = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(full - side) + 1));
    const int left =
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(full - side) + 1));
    if (side != full || top != 0 || left != 0) out = crop_resize(out, side, top, left);
  }

  if (config.flip_prob > 0.0f && rng.bernoulli(config.flip_prob)) flip_horizontal(out);

  if (config.brightness > 0.0f) {
    const float f = 1.0f + static_cast<float>(rng.uniform(-config.brightness, config.brightness));
    for (float& p : out.pixels) p *= f;
  }
  if (config.contrast > 0.0f) {
    const float f = 1.0f + static_cast<float>(rng.uniform(-config.contrast, config.contrast));
    double mean = 0.0;
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) mean += luminance(out, y, x);
    const float m = static_cast<float>(mean / (static_cast<double>(out.height) * out.width));
    for (float& p : out.pixels) p = m + (p - m) * f;
  }
  if (config.saturation > 0.0f && out.channels >= 3) {
    const float f = 1.0f + static_cast<float>(rng.uniform(-config.saturation, config.saturation));
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const float g = luminance(out, y, x);
        for (int c = 0; c < out.channels; ++c) out.at(c, y, x) = g + (out.at(c, y, x) - g) * f;
      }
  }
  if (config.grayscale_prob > 0.0f && rng.bernoulli(config.grayscale_prob) && out.channels >= 3) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const float g = luminance(out, y, x);
        for (int c = 0; c < out.channels; ++c) out.at(c, y, x) = g;
      }
  }
  if (config.blur_prob > 0.0f && rng.bernoulli(config.blur_prob)) {
    const float sigma =
        static_cast<float>(rng.uniform(config.blur_sigma_min, config.blur_sigma_max));
    gaussian_blur(out, sigma);
  }

  out.clamp01();
  return out;
}

std::pair<Image, Image> make_view_pair(const Image& image, const AugmentConfig& config, Rng& rng) {
  Rng first = rng.split("view-a");
  Rng second = rng.split("view-b");
  return {augment(image, config, first), augment(image, config, second)};
}

}  // namespace dbd
