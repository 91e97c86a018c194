#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbd/dataset.hpp"
#include "dbd/nn/model.hpp"
#include "dbd/triggers.hpp"

namespace dbd {

struct FilteringReport {
  std::int64_t poisons_in_high = 0;
  std::int64_t poisons_in_low = 0;
  std::int64_t poisons_total = 0;
  std::int64_t benign_in_high = 0;
  std::int64_t high_total = 0;
  std::int64_t low_total = 0;
  double poison_fraction_in_high = 0.0;  // poisons_in_high / poisons_total
  double poison_capture_rate = 0.0;      // poisons_in_low / poisons_total
  double successful_filtering_rate = 0.0;  // poisons_in_low / low_total

  nlohmann::json to_json() const;
};

struct ClusterProbeResult {
  double frac_nearest_target = 0.0;
  double frac_nearest_truth = 0.0;
  double frac_nearest_other = 0.0;
  // Top-2 principal-direction projection of every sample, for plotting.
  struct Point {
    std::int64_t sample_id;
    double x, y;
    int label;
    bool is_poisoned;
  };
  std::vector<Point> projection;

  nlohmann::json to_json() const;
};

struct MetricsReport {
  double benign_accuracy = 0.0;
  double attack_success_rate = 0.0;
  std::int64_t n_eval_benign = 0;
  std::int64_t n_eval_poisoned = 0;
  std::optional<FilteringReport> filtering;
  std::optional<ClusterProbeResult> cluster_probe;

  nlohmann::json to_json() const;
};

/// Batched eval-mode argmax predictions (first index wins ties).
std::vector<int> predict(nn::Model<float>& model, const std::vector<const Image*>& images,
                         int batch_size = 256);

/// Fraction of correct predictions.
double accuracy_from_predictions(const std::vector<int>& predictions,
                                 const std::vector<int>& labels);

/// Fraction of non-target-class samples predicted as the target. Samples
/// whose true label equals the target are excluded; throws ContractError if
/// nothing remains.
double asr_from_predictions(const std::vector<int>& predictions, const std::vector<int>& labels,
                            int target_label);

/// BA over the benign test set.
double benign_accuracy(nn::Model<float>& model, const Dataset& test_set);

/// ASR: trigger every non-target test sample with the generator's
/// evaluation-time poisoning and count target predictions.
double attack_success_rate(nn::Model<float>& model, const Dataset& test_set,
                           const TriggerGenerator& generator, int target_label);

/// Shrink toward the top-left and zero-pad bottom/right back to size.
Image shrinkpad(const Image& image, double shrink_rate);

}  // namespace dbd
