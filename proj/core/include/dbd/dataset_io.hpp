#pragma once

#include <filesystem>

#include "dbd/dataset.hpp"

namespace dbd {

// Dataset directory layout (format_version 1, all integers little-endian):
//   manifest.json  - num_classes, image shape, sample count, format version
//   images.u8      - sample-major C*H*W uint8 pixel rows
//   labels.u16     - one uint16 per sample
//   poison.json    - optional provenance (target label, rate, per-sample records)
// Pixels quantize to round(p*255) on write and divide by 255 on read, so
// writes are deterministic and load(save(d)) is exact for u8-grid datasets.

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void save_poisoned_dataset(const PoisonedDataset& poisoned, const std::filesystem::path& dir);
PoisonedDataset load_poisoned_dataset(const std::filesystem::path& dir);

/// Stores a single image as a 1-sample dataset directory (trigger blobs).
void save_image_blob(const Image& image, const std::filesystem::path& dir);
Image load_image_blob(const std::filesystem::path& dir);

}  // namespace dbd
