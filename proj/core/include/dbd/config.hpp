#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dbd/attack/adaptive.hpp"
#include "dbd/attack/pgd.hpp"
#include "dbd/pipeline/stages.hpp"

namespace dbd {

// Experiment configuration: one versioned JSON document drives a whole run.
// validate_config fills every omitted field with its default, rejects unknown
// keys and invariant violations with an itemized ConfigError, and emits the
// fully resolved document (config_version 1). Validation of a resolved
// document is a fixed point.

struct DatasetBlock {
  std::string source = "synthetic";  // "synthetic" | "directory"
  SyntheticSpec synthetic;
  std::string path;  // when source == "directory"
};

struct AttackBlock {
  std::string generator = "none";  // none|badnets|blended|wanet|label_consistent|adaptive_replace
  double poisoning_rate = 0.05;    // clean-label default is 0.025
  int target_label = 3;
  std::string mode = "poison_label";  // "poison_label" | "clean_label"

  struct Patch {
    int height = 2, width = 2;
    std::string position = "lower_right";  // or "upper_left"
    double value = 1.0;                    // solid patch intensity
  } patch;
  struct Blend {
    double ratio = 0.1;
    std::string trigger_path;  // empty: built-in plaid pattern
  } blend;
  struct Warp {
    int grid_size = 4;
    double strength = 0.5;
    double noise_rate = 0.2;
  } warp;
  PGDSpec pgd;  // clean-label perturbation budget
  struct Surrogate {
    int epochs = 10;
  } surrogate;
  struct Replace {
    std::string trigger_path;  // required for adaptive_replace
  } replace;
};

struct DefenseBlock {
  std::string kind = "dbd";  // "dbd" | "none"
  double alpha_percent = 50.0;
  Stage1Config stage1;
  Stage2Config stage2;
  Stage3Config stage3;
  SupervisedConfig supervised;  // the no-defense trainer
};

struct EvaluationBlock {
  int test_per_class = 100;
  std::string test_path;  // directory test set when the train set is one
  bool probe = true;
  bool filtering = true;
  double shrinkpad_rate = 0.0;  // 0 disables the preprocessing baseline
  std::uint64_t seed = 0;       // reserved for stochastic metrics; training ignores it
};

struct AdaptiveBlock {
  AdaptiveAttackSpec spec;
  std::string backbone_checkpoint;  // empty: train a fresh benign backbone
  Stage1Config backbone_stage1;     // used when training the attacker backbone
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/out";
  DatasetBlock dataset;
  AttackBlock attack;
  std::vector<int> model_channels = {32, 64, 128, 256};
  int model_projection_dim = 128;
  DefenseBlock defense;
  EvaluationBlock evaluation;
  AdaptiveBlock adaptive;

  nlohmann::json resolved;  // full document, every default applied
};

/// Parses and validates a raw config document.
ExperimentConfig validate_config(const nlohmann::json& raw);

/// Reads, parses and validates a config file.
ExperimentConfig load_config_file(const std::filesystem::path& path);

}  // namespace dbd
