#include "dbd/eval/metrics.hpp"

#include <cmath>

namespace dbd {

using nlohmann::json;

json FilteringReport::to_json() const {
  return {{"poisons_in_high", poisons_in_high},
          {"poisons_in_low", poisons_in_low},
          {"poisons_total", poisons_total},
          {"benign_in_high", benign_in_high},
          {"high_total", high_total},
          {"low_total", low_total},
          {"poison_fraction_in_high", poison_fraction_in_high},
          {"poison_capture_rate", poison_capture_rate},
          {"successful_filtering_rate", successful_filtering_rate}};
}

json ClusterProbeResult::to_json() const {
  return {{"frac_nearest_target", frac_nearest_target},
          {"frac_nearest_truth", frac_nearest_truth},
          {"frac_nearest_other", frac_nearest_other}};
}

json MetricsReport::to_json() const {
  json out = {{"benign_accuracy", benign_accuracy},
              {"attack_success_rate", attack_success_rate},
              {"n_eval_benign", n_eval_benign},
              {"n_eval_poisoned", n_eval_poisoned}};
  if (filtering) out["filtering"] = filtering->to_json();
  if (cluster_probe) out["cluster_probe"] = cluster_probe->to_json();
  return out;
}

std::vector<int> predict(nn::Model<float>& model, const std::vector<const Image*>& images,
                         int batch_size) {
  std::vector<int> out;
  out.reserve(images.size());
  const int k = model.spec().num_classes;
  nn::Model<float>::ForwardCache cache;
  for (size_t begin = 0; begin < images.size(); begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(images.size(), begin + static_cast<size_t>(batch_size));
    std::vector<const Image*> chunk(images.begin() + static_cast<std::ptrdiff_t>(begin),
                                    images.begin() + static_cast<std::ptrdiff_t>(end));
    const std::vector<float> logits =
        model.forward(nn::make_batch<float>(chunk), nn::Head::logits, nn::Mode::eval, cache);
    for (size_t i = 0; i < chunk.size(); ++i) {
      const float* row = logits.data() + i * static_cast<size_t>(k);
      int best = 0;
      for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      out.push_back(best);
    }
  }
  return out;
}

double accuracy_from_predictions(const std::vector<int>& predictions,
                                 const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ContractError("prediction/label size mismatch or empty evaluation");
  std::int64_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double asr_from_predictions(const std::vector<int>& predictions, const std::vector<int>& labels,
                            int target_label) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ContractError("prediction/label size mismatch or empty evaluation");
  std::int64_t hits = 0, considered = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] == target_label) continue;  // exclusion rule: y != y_t only
    ++considered;
    hits += predictions[i] == target_label ? 1 : 0;
  }
  if (considered == 0)
    throw ContractError("attack success rate undefined: every sample has the target label");
  return static_cast<double>(hits) / static_cast<double>(considered);
}

double benign_accuracy(nn::Model<float>& model, const Dataset& test_set) {
  test_set.validate();
  std::vector<const Image*> images;
  std::vector<int> labels;
  for (const auto& s : test_set.samples) {
    images.push_back(&s.image);
    labels.push_back(s.label);
  }
  return accuracy_from_predictions(predict(model, images), labels);
}

double attack_success_rate(nn::Model<float>& model, const Dataset& test_set,
                           const TriggerGenerator& generator, int target_label) {
  test_set.validate();
  std::vector<Image> triggered;
  std::vector<int> labels;
  for (const auto& s : test_set.samples) {
    if (s.label == target_label) continue;
    triggered.push_back(generator.apply_eval(s.image));
    labels.push_back(s.label);
  }
  if (triggered.empty())
    throw ContractError("attack success rate undefined: every sample has the target label");
  std::vector<const Image*> images;
  for (const Image& img : triggered) images.push_back(&img);
  return asr_from_predictions(predict(model, images), labels, target_label);
}

Image shrinkpad(const Image& image, double shrink_rate) {
  if (shrink_rate <= 0.0 || shrink_rate >= 1.0)
    throw ConfigError("shrink rate must lie in (0, 1)");
  const int new_h = std::max(1, static_cast<int>(std::floor((1.0 - shrink_rate) * image.height)));
  const int new_w = std::max(1, static_cast<int>(std::floor((1.0 - shrink_rate) * image.width)));

  Image out(image.channels, image.height, image.width, 0.0f);
  const float sy = static_cast<float>(image.height) / static_cast<float>(new_h);
  const float sx = static_cast<float>(image.width) / static_cast<float>(new_w);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < new_h; ++y)
      for (int x = 0; x < new_w; ++x) {
        const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
        const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
        out.at(c, y, x) = sample_bilinear(image, c, src_y, src_x);
      }
  out.clamp01();
  return out;
}

}  // namespace dbd
