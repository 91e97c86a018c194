#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dbd/errors.hpp"

namespace dbd {

/// Dense C×H×W image with float pixels in [0, 1]. The 0..255 integer domain
/// exists only at the file boundary (dataset_io quantizes on write).
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // channel-major, then row, then column

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(static_cast<size_t>(c) * h * w, fill) {
    if (c <= 0 || h <= 0 || w <= 0) throw ContractError("Image dimensions must be positive");
  }

  size_t size() const { return pixels.size(); }

  float& at(int c, int y, int x) {
    return pixels[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return pixels[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Image& other) const {
    return channels == other.channels && height == other.height && width == other.width;
  }

  void clamp01() {
    for (float& p : pixels) p = std::clamp(p, 0.0f, 1.0f);
  }

  bool operator==(const Image& other) const = default;
};

inline float luminance(const Image& img, int y, int x) {
  if (img.channels >= 3) {
    return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
  }
  return img.at(0, y, x);
}

/// Clamped bilinear lookup at fractional coordinates (border pixels repeat).
inline float sample_bilinear(const Image& img, int c, float y, float x) {
  const float ymax = static_cast<float>(img.height - 1);
  const float xmax = static_cast<float>(img.width - 1);
  y = std::clamp(y, 0.0f, ymax);
  x = std::clamp(x, 0.0f, xmax);
  const int y0 = static_cast<int>(y);
  const int x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const float fy = y - static_cast<float>(y0);
  const float fx = x - static_cast<float>(x0);
  const float top = img.at(c, y0, x0) * (1.0f - fx) + img.at(c, y0, x1) * fx;
  const float bot = img.at(c, y1, x0) * (1.0f - fx) + img.at(c, y1, x1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

}  // namespace dbd
