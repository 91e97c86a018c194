#include "dbd/poison.hpp"

#include <cmath>
#include <unordered_set>

#include "dbd/rng.hpp"

namespace dbd {

namespace {

/// First `count` entries of a seeded Fisher-Yates shuffle of `pool`.
std::vector<size_t> sample_without_replacement(std::vector<size_t> pool, size_t count, Rng& rng) {
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

PoisonedDataset poison_dataset(const Dataset& dataset, double poisoning_rate, int target_label,
                               const TriggerGenerator& generator, PoisonMode mode,
                               std::uint64_t seed) {
  dataset.validate();
  if (poisoning_rate < 0.0 || poisoning_rate > 1.0)
    throw ConfigError("poisoning rate must lie in [0, 1]");
  if (target_label < 0 || target_label >= dataset.num_classes)
    throw ConfigError("target label out of range");

  const size_t n = dataset.size();
  const auto poison_count = static_cast<size_t>(std::llround(poisoning_rate * static_cast<double>(n)));

  std::vector<size_t> eligible;
  for (size_t i = 0; i < n; ++i) {
    const bool is_target = dataset.samples[i].label == target_label;
    if (mode == PoisonMode::poison_label ? !is_target : is_target) eligible.push_back(i);
  }
  if (poison_count > eligible.size()) {
    throw ConfigError("cannot poison " + std::to_string(poison_count) + " samples: only " +
                      std::to_string(eligible.size()) + " eligible under " +
                      (mode == PoisonMode::clean_label ? std::string("clean-label")
                                                       : std::string("poison-label")) +
                      " selection");
  }

  Rng rng(fold(seed, "poison-select"));
  const std::vector<size_t> chosen = sample_without_replacement(eligible, poison_count, rng);
  std::unordered_set<size_t> chosen_set(chosen.begin(), chosen.end());

  PoisonedDataset out;
  out.dataset = dataset;
  out.dataset.name = dataset.name + "+" + generator.id();
  out.target_label = target_label;
  out.poisoning_rate = poisoning_rate;
  out.records.resize(n);

  for (size_t i = 0; i < n; ++i) {
    const LabeledSample& src = dataset.samples[i];
    PoisonRecord& rec = out.records[i];
    rec.sample_id = src.sample_id;
    rec.original_label = src.label;
    if (!chosen_set.contains(i)) continue;
    rec.is_poisoned = true;
    rec.generator_id = generator.id();
    out.dataset.samples[i].image = generator.apply_train(src);
    if (mode == PoisonMode::poison_label) out.dataset.samples[i].label = target_label;
  }

  // Warp attacks ship extra label-preserving decoys so the model cannot key
  // on "any warp means target class".
  if (const auto* warp = dynamic_cast<const WarpGenerator*>(&generator);
      warp != nullptr && warp->noise_rate() > 0.0f && mode == PoisonMode::poison_label) {
    const auto decoy_count =
        static_cast<size_t>(std::llround(warp->noise_rate() * static_cast<double>(n)));
    std::vector<size_t> untouched;
    for (size_t i = 0; i < n; ++i)
      if (!chosen_set.contains(i)) untouched.push_back(i);
    if (decoy_count > untouched.size())
      throw ConfigError("warp noise_rate needs " + std::to_string(decoy_count) +
                        " decoys but only " + std::to_string(untouched.size()) +
                        " samples remain");
    Rng decoy_rng(fold(seed, "warp-decoys"));
    for (size_t i : sample_without_replacement(untouched, decoy_count, decoy_rng)) {
      out.dataset.samples[i].image = warp->apply_noise_decoy(dataset.samples[i]);
      out.records[i].generator_id = warp->id() + ":noise";
    }
  }

  return out;
}

}  // namespace dbd
