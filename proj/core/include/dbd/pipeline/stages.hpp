#pragma once

#include <functional>
#include <map>

#include "dbd/augment.hpp"
#include "dbd/dataset.hpp"
#include "dbd/log.hpp"
#include "dbd/losses.hpp"
#include "dbd/nn/optim.hpp"

namespace dbd {

struct StageReport {
  int stage_id = 0;
  int epochs_run = 0;
  double final_loss = 0.0;
  double wall_time_seconds = 0.0;
  std::string checkpoint_path;
};

/// Loss-ranked split of the training set: D_h keeps labels, D_l loses them.
struct CredibilitySplit {
  std::vector<std::int64_t> high_credible_ids;
  std::vector<std::int64_t> low_credible_ids;
  double filtering_rate = 50.0;  // alpha, in percent
  std::map<std::int64_t, double> per_sample_loss;

  void validate(size_t expected_total) const;
};

/// D_h = the round(alpha% * N) samples with the smallest loss; ties break by
/// ascending sample id.
CredibilitySplit split_by_credibility(const std::map<std::int64_t, double>& per_sample_loss,
                                      double alpha_percent);

struct Stage1Config {
  int epochs = 100;
  int batch_size = 128;  // source images per step; views are 2x
  double tau = 0.5;
  nn::OptimConfig optim;
  AugmentConfig augment = AugmentConfig::strong_default();

  Stage1Config() {
    optim.algo = nn::OptimConfig::Algo::sgd_momentum;
    optim.learning_rate = 0.1;
    optim.momentum = 0.9;
    optim.weight_decay = 5e-4;
    optim.schedule = nn::OptimConfig::Schedule::cosine;
  }
};

struct Stage2Config {
  int epochs = 10;
  int batch_size = 128;
  double sce_alpha = 0.1;
  double sce_beta = 1.0;
  double log_clamp = -4.0;
  nn::OptimConfig optim;

  Stage2Config() {
    optim.algo = nn::OptimConfig::Algo::adam;
    optim.learning_rate = 0.002;
  }
};

struct Stage3Config {
  int epochs = 30;
  int batch_size = 64;
  bool refilter = true;
  double alpha_percent = 50.0;  // refiltering rate, matches the initial split
  int lambda_u_rampup_epochs = 0;  // 0 disables the linear ramp
  LossConfig loss;
  AugmentConfig augment = AugmentConfig::standard_default();
  nn::OptimConfig optim;

  Stage3Config() {
    optim.algo = nn::OptimConfig::Algo::adam;
    optim.learning_rate = 0.002;
  }
};

struct SupervisedConfig {
  int epochs = 30;
  int batch_size = 128;
  AugmentConfig augment = AugmentConfig::standard_default();
  nn::OptimConfig optim;

  SupervisedConfig() {
    optim.algo = nn::OptimConfig::Algo::sgd_momentum;
    optim.learning_rate = 0.05;
    optim.momentum = 0.9;
    optim.weight_decay = 5e-4;
    optim.schedule = nn::OptimConfig::Schedule::cosine;
  }
};

/// Contrastive backbone training on label-free inputs (the signature takes
/// bare images, so labels cannot leak into this stage). Trains the encoder
/// and projection head; the classifier stays frozen at its initialization.
StageReport stage1_train_backbone(const std::vector<Image>& images, nn::Model<float>& model,
                                  const Stage1Config& config, std::uint64_t seed, Logger& log);

struct Stage2Result {
  std::map<std::int64_t, double> per_sample_loss;
  StageReport report;
};

/// Head training over the frozen backbone. Features are extracted once in
/// eval mode (so the backbone, including its normalization statistics, is
/// untouched by construction) and only the classifier parameters train, with
/// the symmetric cross-entropy. Afterwards every sample's loss under the
/// final head is recorded for the credibility split.
Stage2Result stage2_train_head(const PoisonedDataset& data, nn::Model<float>& model,
                               const Stage2Config& config, std::uint64_t seed, Logger& log);

/// Semi-supervised fine-tuning of the whole model on (D_h labeled, D_l
/// unlabeled). When refiltering is on, the per-sample SCE loss is recomputed
/// under the current model after every epoch and the split rebuilt at the
/// same rate before the next one; `on_refilter` observes each rebuilt split.
StageReport stage3_finetune(const PoisonedDataset& data, nn::Model<float>& model,
                            CredibilitySplit& split, const Stage3Config& config,
                            std::uint64_t seed, Logger& log,
                            const std::function<void(int, const CredibilitySplit&)>& on_refilter =
                                nullptr);

/// End-to-end supervised training (no-defense baseline and PGD surrogate).
StageReport train_supervised(const Dataset& data, nn::Model<float>& model,
                             const SupervisedConfig& config, std::uint64_t seed, Logger& log);

/// Eval-mode feature rows (N x feature_dim) for a set of images.
std::vector<float> extract_features(nn::Model<float>& model,
                                    const std::vector<const Image*>& images,
                                    int batch_size = 256);

/// Per-sample SCE loss of the current model over the full labeled set.
std::map<std::int64_t, double> compute_sce_losses(nn::Model<float>& model,
                                                  const PoisonedDataset& data, double sce_alpha,
                                                  double sce_beta, double log_clamp,
                                                  int batch_size = 256);

}  // namespace dbd
