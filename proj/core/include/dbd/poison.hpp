#pragma once

#include <cstdint>

#include "dbd/dataset.hpp"
#include "dbd/triggers.hpp"

namespace dbd {

enum class PoisonMode { poison_label, clean_label };

// Poisoned-set assembly. Exactly round(rate * N) samples are selected by
// seeded sampling without replacement over the eligible pool: samples with
// label != target (poison-label) or label == target (clean-label). Poisoning
// happens at dataset construction, so triggers always precede augmentation.
// A WarpGenerator with noise_rate > 0 additionally converts round(noise_rate
// * N) untouched samples into label-preserving noise-mode decoys.
PoisonedDataset poison_dataset(const Dataset& dataset, double poisoning_rate, int target_label,
                               const TriggerGenerator& generator, PoisonMode mode,
                               std::uint64_t seed);

}  // namespace dbd
