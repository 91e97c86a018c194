#include "dbd/experiment.hpp"

#include <fstream>

#include "dbd/dataset_io.hpp"
#include "dbd/nn/checkpoint.hpp"
#include "dbd/eval/filtering.hpp"
#include "dbd/poison.hpp"

namespace dbd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory", dir.string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out << text;
}

nn::ModelSpec model_spec_for(const ExperimentConfig& config, const Dataset& data) {
  nn::ModelSpec spec;
  spec.in_channels = data.samples.front().image.channels;
  spec.channels = config.model_channels;
  spec.projection_dim = config.model_projection_dim;
  spec.num_classes = data.num_classes;
  return spec;
}

Image build_patch(const ExperimentConfig& config, const Dataset& data) {
  const Image& ref = data.samples.front().image;
  const auto& p = config.attack.patch;
  if (p.height <= 0 || p.width <= 0 || p.height > ref.height || p.width > ref.width)
    throw ConfigError("patch size does not fit the images");
  return Image(ref.channels, p.height, p.width, static_cast<float>(p.value));
}

PatchTriggerSpec build_patch_spec(const ExperimentConfig& config, const Dataset& data) {
  const Image& ref = data.samples.front().image;
  PatchTriggerSpec spec;
  spec.patch = build_patch(config, data);
  if (config.attack.patch.position == "lower_right") {
    spec.row = ref.height - spec.patch.height;
    spec.col = ref.width - spec.patch.width;
  } else {
    spec.row = 0;
    spec.col = 0;
  }
  return spec;
}

void write_split_file(const fs::path& path, const CredibilitySplit& split) {
  std::string text = "# sample_id loss side\n";
  std::vector<std::int64_t> high_sorted = split.high_credible_ids;
  std::sort(high_sorted.begin(), high_sorted.end());
  for (const auto& [id, loss] : split.per_sample_loss) {
    const bool in_high = std::binary_search(high_sorted.begin(), high_sorted.end(), id);
    text += std::to_string(id) + " " + std::to_string(loss) + (in_high ? " h\n" : " l\n");
  }
  write_text(path, text);
}

ClusterProbeResult probe_model(nn::Model<float>& model, const PoisonedDataset& data,
                               int target_label) {
  std::vector<const Image*> images;
  std::vector<int> labels;
  for (const auto& s : data.dataset.samples) {
    images.push_back(&s.image);
    labels.push_back(s.label);
  }
  const std::vector<float> features = extract_features(model, images);
  return cluster_probe(features, model.spec().feature_dim(), labels, data.records,
                       data.dataset.num_classes, target_label);
}

/// BA/ASR with optional shrink-pad preprocessing applied at inference.
MetricsReport evaluate_model(nn::Model<float>& model, const Dataset& test,
                             const TriggerGenerator* generator, int target_label,
                             double shrinkpad_rate) {
  MetricsReport report;
  std::vector<Image> benign_images;
  std::vector<int> labels;
  for (const auto& s : test.samples) {
    benign_images.push_back(shrinkpad_rate > 0.0 ? shrinkpad(s.image, shrinkpad_rate) : s.image);
    labels.push_back(s.label);
  }
  std::vector<const Image*> ptrs;
  for (const Image& img : benign_images) ptrs.push_back(&img);
  report.benign_accuracy = accuracy_from_predictions(predict(model, ptrs), labels);
  report.n_eval_benign = static_cast<std::int64_t>(labels.size());

  if (generator != nullptr) {
    std::vector<Image> triggered;
    std::vector<int> kept_labels;
    for (const auto& s : test.samples) {
      if (s.label == target_label) continue;
      Image img = generator->apply_eval(s.image);
      if (shrinkpad_rate > 0.0) img = shrinkpad(img, shrinkpad_rate);
      triggered.push_back(std::move(img));
      kept_labels.push_back(s.label);
    }
    if (!triggered.empty()) {
      std::vector<const Image*> tptrs;
      for (const Image& img : triggered) tptrs.push_back(&img);
      report.attack_success_rate =
          asr_from_predictions(predict(model, tptrs), kept_labels, target_label);
      report.n_eval_poisoned = static_cast<std::int64_t>(kept_labels.size());
    }
  }
  return report;
}

}  // namespace

Dataset build_train_dataset(const ExperimentConfig& config) {
  if (config.dataset.source == "synthetic")
    return synth_dataset(config.dataset.synthetic, fold(config.seed, "dataset"));
  return load_dataset(config.dataset.path);
}

Dataset build_test_dataset(const ExperimentConfig& config) {
  if (!config.evaluation.test_path.empty()) return load_dataset(config.evaluation.test_path);
  if (config.dataset.source != "synthetic")
    throw ConfigError("directory datasets need evaluation.test_path");
  SyntheticSpec test_spec = config.dataset.synthetic;
  test_spec.per_class = config.evaluation.test_per_class;
  return synth_dataset(test_spec, fold(config.seed, "dataset-test"));
}

std::unique_ptr<TriggerGenerator> build_generator(const ExperimentConfig& config,
                                                  const Dataset& train, Logger& log) {
  const std::string& kind = config.attack.generator;
  if (kind == "none") return nullptr;
  if (kind == "badnets") return std::make_unique<PatchGenerator>(build_patch_spec(config, train));
  if (kind == "blended") {
    const Image& ref = train.samples.front().image;
    BlendTriggerSpec spec;
    spec.blend_ratio = static_cast<float>(config.attack.blend.ratio);
    spec.trigger = config.attack.blend.trigger_path.empty()
                       ? make_blend_pattern(ref.channels, ref.height, ref.width)
                       : load_image_blob(config.attack.blend.trigger_path);
    return std::make_unique<BlendGenerator>(std::move(spec));
  }
  if (kind == "wanet") {
    WarpSpec spec;
    spec.grid_size = config.attack.warp.grid_size;
    spec.strength = static_cast<float>(config.attack.warp.strength);
    spec.noise_rate = static_cast<float>(config.attack.warp.noise_rate);
    spec.seed = fold(config.seed, "warp");
    return std::make_unique<WarpGenerator>(spec);
  }
  if (kind == "adaptive_replace") {
    return std::make_unique<ImageReplaceGenerator>(
        load_image_blob(config.attack.replace.trigger_path), "adaptive_replace");
  }
  if (kind == "label_consistent") {
    auto surrogate = std::make_shared<nn::Model<float>>(model_spec_for(config, train));
    surrogate->init(Rng(fold(config.seed, "surrogate-init")));
    SupervisedConfig surrogate_config = config.defense.supervised;
    surrogate_config.epochs = config.attack.surrogate.epochs;
    log.line("training label-consistent surrogate (" +
             std::to_string(surrogate_config.epochs) + " epochs)");
    train_supervised(train, *surrogate, surrogate_config, fold(config.seed, "surrogate"), log);
    return std::make_unique<LabelConsistentGenerator>(surrogate, config.attack.pgd,
                                                      build_patch_spec(config, train));
  }
  throw ConfigError("unknown attack generator '" + kind + "'");
}

PoisonedDataset build_poisoned_dataset(const ExperimentConfig& config, const Dataset& train,
                                       Logger& log) {
  const auto generator = build_generator(config, train, log);
  if (generator == nullptr) {
    PoisonedDataset benign;
    benign.dataset = train;
    benign.target_label = config.attack.target_label;
    benign.poisoning_rate = 0.0;
    benign.records.resize(train.size());
    for (size_t i = 0; i < train.size(); ++i)
      benign.records[i] = {train.samples[i].sample_id, false, train.samples[i].label, ""};
    return benign;
  }
  const PoisonMode mode = config.attack.mode == "clean_label" ? PoisonMode::clean_label
                                                              : PoisonMode::poison_label;
  return poison_dataset(train, config.attack.poisoning_rate, config.attack.target_label,
                        *generator, mode, fold(config.seed, "attack"));
}

RunResult run_experiment(const ExperimentConfig& config, bool echo_log) {
  const fs::path run_dir = prepare_dir(config.output_dir);
  write_text(run_dir / "config.copy", config.resolved.dump(2) + "\n");
  Logger log(run_dir / "log.txt", echo_log);

  json records = json::array();
  std::string stage_tag = "setup";
  try {
    const Dataset train = build_train_dataset(config);
    const Dataset test = build_test_dataset(config);
    log.line("dataset: " + std::to_string(train.size()) + " train / " +
             std::to_string(test.size()) + " test samples, K=" +
             std::to_string(train.num_classes));

    stage_tag = "poisoning";
    const PoisonedDataset poisoned = build_poisoned_dataset(config, train, log);
    log.line("poisoned " + std::to_string(poisoned.poison_count()) + " of " +
             std::to_string(poisoned.dataset.size()) + " samples (generator " +
             config.attack.generator + ")");
    const auto eval_generator = build_generator(config, train, log);

    const nn::ModelSpec spec = model_spec_for(config, train);
    const int y_t = config.attack.target_label;

    if (config.defense.kind == "none") {
      stage_tag = "supervised";
      nn::Model<float> model(spec);
      model.init(Rng(fold(config.seed, "init-supervised")));
      const StageReport report = train_supervised(poisoned.dataset, model,
                                                  config.defense.supervised,
                                                  fold(config.seed, "supervised"), log);
      nn::save_checkpoint(model, run_dir / "supervised" / "checkpoint", report.epochs_run);

      stage_tag = "evaluation";
      MetricsReport metrics = evaluate_model(model, test, eval_generator.get(), y_t, 0.0);
      if (config.evaluation.probe && poisoned.poison_count() > 0) {
        metrics.cluster_probe = probe_model(model, poisoned, y_t);
        write_probe_csv(*metrics.cluster_probe, run_dir / "probe_supervised.csv");
      }
      json record = metrics.to_json();
      record["tag"] = "supervised";
      records.push_back(record);
      if (config.evaluation.shrinkpad_rate > 0.0) {
        json sp = evaluate_model(model, test, eval_generator.get(), y_t,
                                 config.evaluation.shrinkpad_rate)
                      .to_json();
        sp["tag"] = "supervised_shrinkpad";
        records.push_back(sp);
      }
    } else {
      // Stage 1: self-supervised backbone on label-free images.
      stage_tag = "stage1";
      nn::Model<float> model(spec);
      model.init(Rng(fold(config.seed, "init")));
      std::vector<Image> images_only;
      images_only.reserve(poisoned.dataset.size());
      for (const auto& s : poisoned.dataset.samples) images_only.push_back(s.image);
      stage1_train_backbone(images_only, model, config.defense.stage1, fold(config.seed, "stage1"),
                            log);
      nn::save_checkpoint(model, run_dir / "stage1" / "checkpoint",
                          config.defense.stage1.epochs);
      if (config.evaluation.probe && poisoned.poison_count() > 0) {
        const ClusterProbeResult probe = probe_model(model, poisoned, y_t);
        write_probe_csv(probe, run_dir / "probe_stage1.csv");
        records.push_back({{"tag", "stage1_probe"}, {"cluster_probe", probe.to_json()}});
      }

      // Stage 2: robust head over the frozen backbone, then the split.
      stage_tag = "stage2";
      const Stage2Result stage2 = stage2_train_head(poisoned, model, config.defense.stage2,
                                                    fold(config.seed, "stage2"), log);
      nn::save_checkpoint(model, run_dir / "stage2" / "checkpoint",
                          config.defense.stage2.epochs);
      CredibilitySplit split =
          split_by_credibility(stage2.per_sample_loss, config.defense.alpha_percent);
      split.validate(poisoned.dataset.size());
      prepare_dir(run_dir / "split");
      write_split_file(run_dir / "split" / "epoch_0.txt", split);

      {
        stage_tag = "evaluation";
        MetricsReport metrics = evaluate_model(model, test, eval_generator.get(), y_t, 0.0);
        if (config.evaluation.filtering)
          metrics.filtering = filtering_report(split, poisoned.records);
        json record = metrics.to_json();
        record["tag"] = "stage2";
        records.push_back(record);
      }

      // Stage 3: semi-supervised fine-tuning with per-epoch refiltering.
      stage_tag = "stage3";
      stage3_finetune(poisoned, model, split, config.defense.stage3, fold(config.seed, "stage3"),
                      log, [&](int epoch, const CredibilitySplit& current) {
                        write_split_file(
                            run_dir / "split" / ("epoch_" + std::to_string(epoch) + ".txt"),
                            current);
                      });
      nn::save_checkpoint(model, run_dir / "stage3" / "checkpoint",
                          config.defense.stage3.epochs);

      stage_tag = "evaluation";
      MetricsReport metrics = evaluate_model(model, test, eval_generator.get(), y_t, 0.0);
      if (config.evaluation.filtering)
        metrics.filtering = filtering_report(split, poisoned.records);
      if (config.evaluation.probe && poisoned.poison_count() > 0) {
        metrics.cluster_probe = probe_model(model, poisoned, y_t);
        write_probe_csv(*metrics.cluster_probe, run_dir / "probe_final.csv");
      }
      json record = metrics.to_json();
      record["tag"] = "final";
      records.push_back(record);
      if (config.evaluation.shrinkpad_rate > 0.0) {
        json sp = evaluate_model(model, test, eval_generator.get(), y_t,
                                 config.evaluation.shrinkpad_rate)
                      .to_json();
        sp["tag"] = "final_shrinkpad";
        records.push_back(sp);
      }
    }
  } catch (const std::exception& e) {
    log.line("stage '" + stage_tag + "' failed: " + e.what());
    throw ContractError("stage '" + stage_tag + "' failed: " + e.what());
  }

  std::string lines;
  for (const auto& record : records) lines += record.dump() + "\n";
  write_text(run_dir / "metrics.jsonl", lines);

  RunResult result;
  result.run_dir = run_dir;
  result.metrics = std::move(records);
  return result;
}

fs::path poison_only(const ExperimentConfig& config) {
  const fs::path run_dir = prepare_dir(config.output_dir);
  write_text(run_dir / "config.copy", config.resolved.dump(2) + "\n");
  Logger log(run_dir / "log.txt");
  const Dataset train = build_train_dataset(config);
  const PoisonedDataset poisoned = build_poisoned_dataset(config, train, log);
  const fs::path out = run_dir / "poisoned";
  save_poisoned_dataset(poisoned, out);
  log.line("wrote poisoned dataset (" + std::to_string(poisoned.poison_count()) + " poisons)");
  return out;
}

namespace {

nn::Model<float> load_model_for(const ExperimentConfig& config, const Dataset& train,
                                const fs::path& checkpoint_dir) {
  const nn::ModelSpec stored = nn::peek_checkpoint_spec(checkpoint_dir);
  nn::ModelSpec expected = model_spec_for(config, train);
  if (stored.num_classes != expected.num_classes)
    throw ConfigError("checkpoint class count does not match the dataset");
  nn::Model<float> model(stored);
  nn::load_checkpoint(model, checkpoint_dir);
  return model;
}

}  // namespace

RunResult eval_only(const ExperimentConfig& config, const fs::path& checkpoint_dir) {
  const fs::path run_dir = prepare_dir(config.output_dir);
  Logger log(run_dir / "log.txt");
  const Dataset train = build_train_dataset(config);
  const Dataset test = build_test_dataset(config);
  nn::Model<float> model = load_model_for(config, train, checkpoint_dir);
  const auto generator = build_generator(config, train, log);
  MetricsReport metrics = evaluate_model(model, test, generator.get(),
                                         config.attack.target_label,
                                         config.evaluation.shrinkpad_rate);
  json record = metrics.to_json();
  record["tag"] = "eval_only";
  json records = json::array({record});
  write_text(run_dir / "metrics.jsonl", record.dump() + "\n");

  RunResult result;
  result.run_dir = run_dir;
  result.metrics = std::move(records);
  return result;
}

RunResult probe_only(const ExperimentConfig& config, const fs::path& checkpoint_dir) {
  const fs::path run_dir = prepare_dir(config.output_dir);
  Logger log(run_dir / "log.txt");
  const Dataset train = build_train_dataset(config);
  const PoisonedDataset poisoned = build_poisoned_dataset(config, train, log);
  if (poisoned.poison_count() == 0)
    throw ConfigError("probe needs a poisoning attack in the config");
  nn::Model<float> model = load_model_for(config, train, checkpoint_dir);
  const ClusterProbeResult probe = probe_model(model, poisoned, config.attack.target_label);
  write_probe_csv(probe, run_dir / "probe.csv");
  json record = {{"tag", "probe"}, {"cluster_probe", probe.to_json()}};
  write_text(run_dir / "metrics.jsonl", record.dump() + "\n");

  RunResult result;
  result.run_dir = run_dir;
  result.metrics = json::array({record});
  return result;
}

fs::path run_adaptive_attack(const ExperimentConfig& config, bool echo_log) {
  const fs::path run_dir = prepare_dir(config.output_dir);
  write_text(run_dir / "config.copy", config.resolved.dump(2) + "\n");
  Logger log(run_dir / "log.txt", echo_log);

  const Dataset benign = build_train_dataset(config);
  const nn::ModelSpec spec = model_spec_for(config, benign);
  nn::Model<float> backbone(spec);
  if (config.adaptive.backbone_checkpoint.empty()) {
    backbone.init(Rng(fold(config.seed, "adaptive-init")));
    std::vector<Image> images_only;
    for (const auto& s : benign.samples) images_only.push_back(s.image);
    log.line("training attacker backbone on benign data");
    stage1_train_backbone(images_only, backbone, config.adaptive.backbone_stage1,
                          fold(config.seed, "adaptive-backbone"), log);
    nn::save_checkpoint(backbone, run_dir / "backbone" / "checkpoint",
                        config.adaptive.backbone_stage1.epochs);
  } else {
    nn::load_checkpoint(backbone, config.adaptive.backbone_checkpoint);
  }

  AdaptiveAttackSpec spec_run = config.adaptive.spec;
  spec_run.seed = fold(config.seed, "adaptive");
  const AdaptiveAttackResult result = optimize_adaptive_trigger(backbone, benign, spec_run);

  const fs::path trigger_dir = run_dir / "trigger";
  save_image_blob(result.trigger, trigger_dir);
  std::string trace;
  for (size_t i = 0; i < result.objective_trace.size(); ++i)
    trace += json({{"step", i}, {"objective", result.objective_trace[i]}}).dump() + "\n";
  write_text(run_dir / "adaptive_trace.jsonl", trace);
  log.line("adaptive trigger saved; objective " +
           (result.objective_trace.empty()
                ? std::string("(no steps)")
                : std::to_string(result.objective_trace.front()) + " -> " +
                      std::to_string(result.objective_trace.back())));
  return trigger_dir;
}

}  // namespace dbd
