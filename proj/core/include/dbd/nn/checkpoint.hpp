#pragma once

#include <filesystem>

#include "dbd/nn/model.hpp"

namespace dbd::nn {

// Checkpoint layout: `manifest.json` (spec hash, model spec, step count,
// optimizer-state flag, named array index) next to `params.bin`, the
// little-endian float32 parameter and buffer arrays concatenated in manifest
// order. Reload is bit-exact for float32 values.

void save_checkpoint(Model<float>& model, const std::filesystem::path& dir, int step);

/// Loads into a freshly constructed model; throws FormatError on a spec-hash
/// mismatch or malformed file. Returns the stored step count.
int load_checkpoint(Model<float>& model, const std::filesystem::path& dir);

/// Reads the stored ModelSpec without touching parameters.
ModelSpec peek_checkpoint_spec(const std::filesystem::path& dir);

}  // namespace dbd::nn
