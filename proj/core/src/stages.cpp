#include "dbd/pipeline/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace dbd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

void CredibilitySplit::validate(size_t expected_total) const {
  if (high_credible_ids.size() + low_credible_ids.size() != expected_total)
    throw ContractError("credibility split does not cover the dataset");
  const auto expected_high = static_cast<size_t>(
      std::llround(filtering_rate / 100.0 * static_cast<double>(expected_total)));
  if (high_credible_ids.size() != expected_high)
    throw ContractError("credibility split size does not match the filtering rate");
  std::vector<std::int64_t> all;
  all.reserve(expected_total);
  all.insert(all.end(), high_credible_ids.begin(), high_credible_ids.end());
  all.insert(all.end(), low_credible_ids.begin(), low_credible_ids.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw ContractError("credibility split has overlapping ids");
}

CredibilitySplit split_by_credibility(const std::map<std::int64_t, double>& per_sample_loss,
                                      double alpha_percent) {
  if (alpha_percent < 0.0 || alpha_percent > 100.0)
    throw ContractError("filtering rate must lie in [0, 100]");
  std::vector<std::pair<double, std::int64_t>> order;
  order.reserve(per_sample_loss.size());
  for (const auto& [id, loss] : per_sample_loss) order.emplace_back(loss, id);
  std::sort(order.begin(), order.end());  // (loss, id) ascending: ids break ties

  CredibilitySplit split;
  split.filtering_rate = alpha_percent;
  split.per_sample_loss = per_sample_loss;
  const auto high_count = static_cast<size_t>(
      std::llround(alpha_percent / 100.0 * static_cast<double>(order.size())));
  for (size_t i = 0; i < order.size(); ++i) {
    if (i < high_count)
      split.high_credible_ids.push_back(order[i].second);
    else
      split.low_credible_ids.push_back(order[i].second);
  }
  return split;
}

StageReport stage1_train_backbone(const std::vector<Image>& images, nn::Model<float>& model,
                                  const Stage1Config& config, std::uint64_t seed, Logger& log) {
  if (images.empty()) throw ConfigError("stage 1 received an empty dataset");
  const auto start = Clock::now();

  nn::OptimConfig optim = config.optim;
  const size_t n = images.size();
  const int steps_per_epoch =
      static_cast<int>((n + static_cast<size_t>(config.batch_size) - 1) / config.batch_size);
  if (optim.schedule == nn::OptimConfig::Schedule::cosine && optim.total_steps == 0)
    optim.total_steps = std::max(1, config.epochs * steps_per_epoch);

  nn::Optimizer<float> optimizer(model.params(), optim);
  optimizer.set_frozen(nn::ParamGroup::head, true);  // classifier is not part of this stage

  nn::Model<float>::ForwardCache cache;
  int step_index = 0;
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(fold(fold(seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    const std::vector<size_t> order = shuffled_indices(n, shuffle_rng);
    const std::uint64_t aug_epoch_key = fold(fold(seed, "aug"), static_cast<std::uint64_t>(epoch));

    epoch_loss = 0.0;
    int batches = 0;
    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(n, begin + static_cast<size_t>(config.batch_size));
      if (end - begin < 2) continue;  // a single pair is degenerate (loss 0)

      std::vector<Image> views;
      views.reserve(2 * (end - begin));
      for (size_t i = begin; i < end; ++i) {
        Rng aug_rng(fold(aug_epoch_key, static_cast<std::uint64_t>(order[i])));
        auto [a, b] = make_view_pair(images[order[i]], config.augment, aug_rng);
        views.push_back(std::move(a));
        views.push_back(std::move(b));
      }
      std::vector<const Image*> ptrs;
      ptrs.reserve(views.size());
      for (const Image& v : views) ptrs.push_back(&v);

      const std::vector<float> embeddings =
          model.forward(nn::make_batch<float>(ptrs), nn::Head::projection, nn::Mode::train, cache);
      std::vector<float> d_embeddings;
      const double loss =
          losses::nt_xent(embeddings, static_cast<int>(views.size()),
                          model.spec().projection_dim, config.tau, &d_embeddings);

      model.zero_grad();
      model.backward(d_embeddings, cache);
      optimizer.step(step_index++);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
    log.line("stage1 epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) +
             " loss " + std::to_string(epoch_loss));
  }

  StageReport report;
  report.stage_id = 1;
  report.epochs_run = config.epochs;
  report.final_loss = epoch_loss;
  report.wall_time_seconds = seconds_since(start);
  return report;
}

std::vector<float> extract_features(nn::Model<float>& model,
                                    const std::vector<const Image*>& images, int batch_size) {
  const int f = model.spec().feature_dim();
  std::vector<float> out;
  out.reserve(images.size() * static_cast<size_t>(f));
  nn::Model<float>::ForwardCache cache;
  for (size_t begin = 0; begin < images.size(); begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(images.size(), begin + static_cast<size_t>(batch_size));
    std::vector<const Image*> chunk(images.begin() + static_cast<std::ptrdiff_t>(begin),
                                    images.begin() + static_cast<std::ptrdiff_t>(end));
    const std::vector<float> rows =
        model.forward(nn::make_batch<float>(chunk), nn::Head::features, nn::Mode::eval, cache);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

Stage2Result stage2_train_head(const PoisonedDataset& data, nn::Model<float>& model,
                               const Stage2Config& config, std::uint64_t seed, Logger& log) {
  const auto start = Clock::now();
  const size_t n = data.dataset.size();
  if (n == 0) throw ConfigError("stage 2 received an empty dataset");
  const int f = model.spec().feature_dim();
  const int k = model.spec().num_classes;

  std::vector<const Image*> images;
  std::vector<int> labels;
  images.reserve(n);
  for (const auto& s : data.dataset.samples) {
    images.push_back(&s.image);
    labels.push_back(s.label);
  }
  const std::vector<float> features = extract_features(model, images);

  nn::Linear<float>& head = model.classifier();
  nn::Optimizer<float> optimizer({&head.weight, &head.bias}, config.optim);

  typename nn::Linear<float>::Cache cache;
  int step_index = 0;
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(fold(fold(seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    const std::vector<size_t> order = shuffled_indices(n, shuffle_rng);
    epoch_loss = 0.0;
    int batches = 0;
    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(n, begin + static_cast<size_t>(config.batch_size));
      const int b = static_cast<int>(end - begin);
      std::vector<float> feat_batch(static_cast<size_t>(b) * f);
      std::vector<int> label_batch(static_cast<size_t>(b));
      for (int i = 0; i < b; ++i) {
        const size_t src = order[begin + static_cast<size_t>(i)];
        std::copy(features.begin() + static_cast<std::ptrdiff_t>(src * f),
                  features.begin() + static_cast<std::ptrdiff_t>((src + 1) * f),
                  feat_batch.begin() + static_cast<std::ptrdiff_t>(i) * f);
        label_batch[static_cast<size_t>(i)] = labels[src];
      }
      std::vector<float> logits;
      head.forward(feat_batch, b, logits, cache);
      std::vector<float> d_logits;
      const double loss = losses::sce_on_logits(logits, label_batch, k, config.sce_alpha,
                                                config.sce_beta, config.log_clamp, &d_logits);
      head.weight.zero_grad();
      head.bias.zero_grad();
      head.backward(d_logits, cache, nullptr);
      optimizer.step(step_index++);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
    log.line("stage2 epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) +
             " loss " + std::to_string(epoch_loss));
  }

  // Per-sample loss under the final head, in one pass.
  Stage2Result result;
  {
    std::vector<float> logits;
    head.forward(features, static_cast<int>(n), logits, cache);
    std::vector<double> per_row;
    losses::sce_on_logits(logits, labels, k, config.sce_alpha, config.sce_beta, config.log_clamp,
                          static_cast<std::vector<float>*>(nullptr), &per_row);
    for (size_t i = 0; i < n; ++i)
      result.per_sample_loss[data.dataset.samples[i].sample_id] = per_row[i];
  }

  result.report.stage_id = 2;
  result.report.epochs_run = config.epochs;
  result.report.final_loss = epoch_loss;
  result.report.wall_time_seconds = seconds_since(start);
  return result;
}

std::map<std::int64_t, double> compute_sce_losses(nn::Model<float>& model,
                                                  const PoisonedDataset& data, double sce_alpha,
                                                  double sce_beta, double log_clamp,
                                                  int batch_size) {
  const int k = model.spec().num_classes;
  std::map<std::int64_t, double> out;
  nn::Model<float>::ForwardCache cache;
  const size_t n = data.dataset.size();
  for (size_t begin = 0; begin < n; begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(n, begin + static_cast<size_t>(batch_size));
    std::vector<const Image*> chunk;
    std::vector<int> labels;
    for (size_t i = begin; i < end; ++i) {
      chunk.push_back(&data.dataset.samples[i].image);
      labels.push_back(data.dataset.samples[i].label);
    }
    const std::vector<float> logits =
        model.forward(nn::make_batch<float>(chunk), nn::Head::logits, nn::Mode::eval, cache);
    std::vector<double> per_row;
    losses::sce_on_logits(logits, labels, k, sce_alpha, sce_beta, log_clamp,
                          static_cast<std::vector<float>*>(nullptr), &per_row);
    for (size_t i = begin; i < end; ++i)
      out[data.dataset.samples[i].sample_id] = per_row[i - begin];
  }
  return out;
}

StageReport stage3_finetune(const PoisonedDataset& data, nn::Model<float>& model,
                            CredibilitySplit& split, const Stage3Config& config,
                            std::uint64_t seed, Logger& log,
                            const std::function<void(int, const CredibilitySplit&)>& on_refilter) {
  const auto start = Clock::now();
  if (split.high_credible_ids.empty()) throw ConfigError("stage 3 needs a nonempty D_h");
  config.loss.validate();

  std::map<std::int64_t, size_t> index_by_id;
  for (size_t i = 0; i < data.dataset.size(); ++i)
    index_by_id[data.dataset.samples[i].sample_id] = i;

  nn::Optimizer<float> optimizer(model.params(), config.optim);
  int step_index = 0;
  double epoch_loss = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Snapshot the current split; a refilter applies only at epoch boundary.
    const std::vector<std::int64_t> high = split.high_credible_ids;
    const std::vector<std::int64_t> low = split.low_credible_ids;

    int batch = config.batch_size;
    if (static_cast<size_t>(batch) > high.size()) {
      batch = static_cast<int>(high.size());
      log.line("stage3 warning: batch size reduced to " + std::to_string(batch) +
               " (|D_h| is small)");
    }

    Rng shuffle_rng(fold(fold(seed, "shuffle-h"), static_cast<std::uint64_t>(epoch)));
    const std::vector<size_t> h_order = shuffled_indices(high.size(), shuffle_rng);
    Rng unlabeled_rng(fold(fold(seed, "draw-u"), static_cast<std::uint64_t>(epoch)));

    LossConfig loss_config = config.loss;
    if (config.lambda_u_rampup_epochs > 0) {
      const double ramp =
          std::min(1.0, static_cast<double>(epoch + 1) / config.lambda_u_rampup_epochs);
      loss_config.lambda_u = config.loss.lambda_u * ramp;
    }

    epoch_loss = 0.0;
    int batches = 0;
    for (size_t begin = 0; begin < high.size(); begin += static_cast<size_t>(batch)) {
      const size_t end = std::min(high.size(), begin + static_cast<size_t>(batch));
      const size_t b = end - begin;

      std::vector<const Image*> labeled_images;
      std::vector<int> labels;
      for (size_t i = begin; i < end; ++i) {
        const size_t idx = index_by_id.at(high[h_order[i]]);
        labeled_images.push_back(&data.dataset.samples[idx].image);
        labels.push_back(data.dataset.samples[idx].label);
      }

      // Unlabeled batch of equal size, drawn uniformly from D_l image-only.
      std::vector<const Image*> unlabeled_images;
      for (size_t i = 0; i < b; ++i) {
        const std::int64_t id = low.empty()
                                    ? high[h_order[(begin + i) % high.size()]]
                                    : low[unlabeled_rng.uniform_index(low.size())];
        unlabeled_images.push_back(&data.dataset.samples[index_by_id.at(id)].image);
      }

      model.zero_grad();
      Rng batch_rng(fold(fold(fold(seed, "mixmatch"), static_cast<std::uint64_t>(epoch)),
                         static_cast<std::uint64_t>(batches)));
      losses::MixMatchDiagnostics diag;
      const double loss = losses::mixmatch_batch_loss(model, labeled_images, labels,
                                                      unlabeled_images, config.augment,
                                                      loss_config, batch_rng, &diag);
      optimizer.step(step_index++);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
    log.line("stage3 epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) +
             " loss " + std::to_string(epoch_loss));

    if (config.refilter) {
      const auto losses_now = compute_sce_losses(model, data, config.loss.sce_alpha,
                                                 config.loss.sce_beta, config.loss.log_clamp);
      split = split_by_credibility(losses_now, config.alpha_percent);
      split.validate(data.dataset.size());
      if (on_refilter) on_refilter(epoch + 1, split);
    }
  }

  StageReport report;
  report.stage_id = 3;
  report.epochs_run = config.epochs;
  report.final_loss = epoch_loss;
  report.wall_time_seconds = seconds_since(start);
  return report;
}

StageReport train_supervised(const Dataset& data, nn::Model<float>& model,
                             const SupervisedConfig& config, std::uint64_t seed, Logger& log) {
  data.validate();
  const auto start = Clock::now();
  const size_t n = data.size();
  const int k = model.spec().num_classes;

  nn::OptimConfig optim = config.optim;
  const int steps_per_epoch =
      static_cast<int>((n + static_cast<size_t>(config.batch_size) - 1) / config.batch_size);
  if (optim.schedule == nn::OptimConfig::Schedule::cosine && optim.total_steps == 0)
    optim.total_steps = std::max(1, config.epochs * steps_per_epoch);
  nn::Optimizer<float> optimizer(model.params(), optim);

  nn::Model<float>::ForwardCache cache;
  int step_index = 0;
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(fold(fold(seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    const std::vector<size_t> order = shuffled_indices(n, shuffle_rng);
    const std::uint64_t aug_epoch_key = fold(fold(seed, "aug"), static_cast<std::uint64_t>(epoch));

    epoch_loss = 0.0;
    int batches = 0;
    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(n, begin + static_cast<size_t>(config.batch_size));
      std::vector<Image> views;
      std::vector<int> labels;
      views.reserve(end - begin);
      for (size_t i = begin; i < end; ++i) {
        const auto& sample = data.samples[order[i]];
        Rng aug_rng(fold(aug_epoch_key, static_cast<std::uint64_t>(order[i])));
        views.push_back(augment(sample.image, config.augment, aug_rng));
        labels.push_back(sample.label);
      }
      std::vector<const Image*> ptrs;
      for (const Image& v : views) ptrs.push_back(&v);

      const std::vector<float> logits =
          model.forward(nn::make_batch<float>(ptrs), nn::Head::logits, nn::Mode::train, cache);
      std::vector<float> d_logits;
      const double loss = losses::ce_on_logits(logits, labels, k, -30.0, &d_logits);
      model.zero_grad();
      model.backward(d_logits, cache);
      optimizer.step(step_index++);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
    log.line("supervised epoch " + std::to_string(epoch + 1) + "/" +
             std::to_string(config.epochs) + " loss " + std::to_string(epoch_loss));
  }

  StageReport report;
  report.stage_id = 0;
  report.epochs_run = config.epochs;
  report.final_loss = epoch_loss;
  report.wall_time_seconds = seconds_since(start);
  return report;
}

}  // namespace dbd
