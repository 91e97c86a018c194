#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbd/image.hpp"

namespace dbd {

struct LabeledSample {
  Image image;
  int label = 0;
  std::int64_t sample_id = 0;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  int num_classes = 0;
  std::string name;

  size_t size() const { return samples.size(); }

  /// Throws ContractError if a label is out of range or an id repeats.
  void validate() const;
};

/// Per-sample poison provenance. Benign samples keep is_poisoned=false and an
/// empty generator id; warp-noise decoys stay benign but carry a generator id.
struct PoisonRecord {
  std::int64_t sample_id = 0;
  bool is_poisoned = false;
  int original_label = 0;
  std::string generator_id;
};

struct PoisonedDataset {
  Dataset dataset;
  std::vector<PoisonRecord> records;  // aligned with dataset.samples
  int target_label = 0;
  double poisoning_rate = 0.0;

  size_t poison_count() const {
    size_t n = 0;
    for (const auto& r : records) n += r.is_poisoned ? 1 : 0;
    return n;
  }
};

struct SyntheticSpec {
  int num_classes = 4;
  int per_class = 500;
  int image_size = 16;
  std::string motif_kind = "shapes";  // only built-in family for now
};

/// Deterministic class-separable synthetic data: per-class geometric motifs
/// with jittered placement over an i.i.d. noise background. Identical
/// (spec, seed) pairs produce byte-identical datasets.
Dataset synth_dataset(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dbd
