#pragma once

#include "dbd/config.hpp"
#include "dbd/eval/metrics.hpp"
#include "dbd/eval/probe.hpp"

namespace dbd {

// Run-directory layout mirrors the external contract:
//   config.copy            resolved configuration (JSON)
//   stage{1,2,3}/checkpoint  (dbd) or supervised/checkpoint (baseline)
//   split/epoch_{e}.txt    sample_id, loss, side (h|l); epoch_0 is stage 2's
//   metrics.jsonl          one JSON record per evaluation
//   probe_*.csv            2-D projections for plotting
//   log.txt                progress and timing

struct RunResult {
  std::filesystem::path run_dir;
  nlohmann::json metrics;  // array of the emitted records
};

/// Full experiment: dataset -> poisoning -> training (dbd pipeline or
/// supervised baseline) -> evaluation, everything persisted under the run
/// directory. Stage failures surface as exceptions tagged with the stage;
/// completed artifacts stay on disk.
RunResult run_experiment(const ExperimentConfig& config, bool echo_log = false);

/// Builds and saves the poisoned dataset only (sub-command `poison-only`).
std::filesystem::path poison_only(const ExperimentConfig& config);

/// Evaluates a saved checkpoint against the config's test set and attack
/// (sub-command `eval-only`). Writes metrics.jsonl into the output dir.
RunResult eval_only(const ExperimentConfig& config, const std::filesystem::path& checkpoint_dir);

/// Cluster probe of a saved checkpoint over the poisoned training set
/// (sub-command `probe`).
RunResult probe_only(const ExperimentConfig& config, const std::filesystem::path& checkpoint_dir);

/// Optimizes the adaptive trigger against a benign-data backbone and stores
/// it as an image blob plus the objective trace (sub-command
/// `adaptive-attack`). Returns the trigger directory.
std::filesystem::path run_adaptive_attack(const ExperimentConfig& config, bool echo_log = false);

/// Deterministic dataset construction shared by the sub-commands.
Dataset build_train_dataset(const ExperimentConfig& config);
Dataset build_test_dataset(const ExperimentConfig& config);
PoisonedDataset build_poisoned_dataset(const ExperimentConfig& config, const Dataset& train,
                                       Logger& log);

/// The configured generator; label-consistent attacks train their surrogate
/// on the benign dataset here. Returns nullptr for generator "none".
std::unique_ptr<TriggerGenerator> build_generator(const ExperimentConfig& config,
                                                  const Dataset& train, Logger& log);

}  // namespace dbd
