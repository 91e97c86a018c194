#include "dbd/dataset.hpp"

#include <array>
#include <cmath>
#include <unordered_set>

#include "dbd/rng.hpp"

namespace dbd {

void Dataset::validate() const {
  if (samples.empty()) throw ContractError("dataset is empty");
  if (num_classes < 2) throw ContractError("dataset needs at least 2 classes");
  std::unordered_set<std::int64_t> seen;
  seen.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= num_classes)
      throw ContractError("label " + std::to_string(s.label) + " out of range for K=" +
                          std::to_string(num_classes));
    if (!seen.insert(s.sample_id).second)
      throw ContractError("duplicate sample_id " + std::to_string(s.sample_id));
  }
}

namespace {

constexpr int kNumShapes = 10;

const std::array<std::array<float, 3>, 10> kPalette = {{
    {1.00f, 0.15f, 0.15f},  // red
    {0.15f, 0.95f, 0.15f},  // green
    {0.25f, 0.45f, 1.00f},  // blue
    {1.00f, 0.95f, 0.20f},  // yellow
    {1.00f, 0.25f, 1.00f},  // magenta
    {0.20f, 0.95f, 0.95f},  // cyan
    {1.00f, 0.60f, 0.10f},  // orange
    {0.95f, 0.95f, 0.95f},  // white
    {0.60f, 0.25f, 1.00f},  // violet
    {0.55f, 0.95f, 0.45f},  // lime
}};

// Hard geometric masks; the shape (not the color) must survive grayscale and
// moderate crops, so each motif has a distinctive silhouette.
bool inside_motif(int shape, float dy, float dx, float r, int y, int x) {
  const float d = std::sqrt(dy * dy + dx * dx);
  switch (shape) {
    case 0: return d <= r;                                               // disk
    case 1: {                                                            // square frame
      float m = std::max(std::abs(dy), std::abs(dx));
      return m <= r && m >= 0.55f * r;
    }
    case 2: return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.55f;  // triangle
    case 3:                                                               // plus
      return (std::abs(dx) <= 0.32f * r && std::abs(dy) <= r) ||
             (std::abs(dy) <= 0.32f * r && std::abs(dx) <= r);
    case 4: return d <= r && ((x - y) % 4 + 4) % 4 < 2;                   // diagonal stripes
    case 5: return std::abs(dx) <= r && std::abs(dy) <= r && (x % 4) < 2; // vertical bars
    case 6: return std::abs(dx) + std::abs(dy) <= r;                      // diamond
    case 7: return d <= r && d >= 0.58f * r;                              // ring
    case 8: return d <= r && std::abs(std::abs(dx) - std::abs(dy)) <= 0.28f * r;  // X
    default: return std::abs(dx) <= r && std::abs(dy) <= r && (y % 4) < 2;        // h-stripes
  }
}

float quantize_u8(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  return std::round(v * 255.0f) / 255.0f;
}

}  // namespace

Dataset synth_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) throw ConfigError("synthetic dataset needs num_classes >= 2");
  if (spec.per_class < 1) throw ConfigError("synthetic dataset needs per_class >= 1");
  if (spec.image_size < 8) throw ConfigError("synthetic dataset needs image_size >= 8");
  if (spec.motif_kind != "shapes")
    throw ConfigError("unknown motif_kind '" + spec.motif_kind + "'");

  const int size = spec.image_size;
  Dataset out;
  out.num_classes = spec.num_classes;
  out.name = "synthetic";
  out.samples.reserve(static_cast<size_t>(spec.num_classes) * spec.per_class);

  std::int64_t next_id = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    const int shape = k % kNumShapes;
    const auto& color = kPalette[static_cast<size_t>(k) % kPalette.size()];
    for (int i = 0; i < spec.per_class; ++i) {
      Rng rng(fold(fold(seed, static_cast<std::uint64_t>(k)), static_cast<std::uint64_t>(i)));
      Image img(3, size, size);
      for (float& p : img.pixels)
        p = quantize_u8(static_cast<float>(rng.uniform(0.05, 0.40)));

      const float r = static_cast<float>(size) * static_cast<float>(rng.uniform(0.26, 0.36));
      const float cy = static_cast<float>(size) * 0.5f +
                       static_cast<float>(rng.uniform(-0.10, 0.10)) * size;
      const float cx = static_cast<float>(size) * 0.5f +
                       static_cast<float>(rng.uniform(-0.10, 0.10)) * size;
      const float brightness = static_cast<float>(rng.uniform(0.80, 1.0));

      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (!inside_motif(shape, static_cast<float>(y) - cy, static_cast<float>(x) - cx, r, y, x))
            continue;
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = quantize_u8(color[c] * brightness);
        }
      }

      out.samples.push_back({std::move(img), k, next_id++});
    }
  }
  return out;
}

}  // namespace dbd
