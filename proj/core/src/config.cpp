#include "dbd/config.hpp"

#include <fstream>
#include <set>

namespace dbd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Typed view over one JSON object: tracks consumed keys, collects errors
/// instead of throwing, and applies defaults for absent fields.
class Block {
public:
  Block(json node, std::string path, std::vector<std::string>& errors)
      : node_(std::move(node)), path_(std::move(path)), errors_(errors) {
    if (!node_.is_object() && !node_.is_null())
      errors_.push_back(path_ + ": expected an object");
  }

  bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

  template <typename T>
  T get(const char* key, T fallback) {
    consumed_.insert(key);
    if (!has(key)) return fallback;
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(path_ + "." + key + ": wrong type");
      return fallback;
    }
  }

  std::string get_enum(const char* key, std::string fallback,
                       const std::set<std::string>& allowed) {
    std::string value = get<std::string>(key, fallback);
    if (!allowed.contains(value)) {
      std::string joined;
      for (const auto& a : allowed) joined += (joined.empty() ? "" : "|") + a;
      errors_.push_back(path_ + "." + key + ": '" + value + "' is not one of " + joined);
      value = fallback;
    }
    return value;
  }

  json child(const char* key) {
    consumed_.insert(key);
    if (!has(key)) return json::object();
    if (!node_.at(key).is_object()) {
      errors_.push_back(path_ + "." + key + ": expected an object");
      return json::object();
    }
    return node_.at(key);
  }

  /// Flags any key the parser never consumed.
  void finish() {
    if (!node_.is_object()) return;
    for (const auto& [key, value] : node_.items())
      if (!consumed_.contains(key)) errors_.push_back(path_ + "." + key + ": unknown key");
  }

  void error(const std::string& message) { errors_.push_back(path_ + ": " + message); }

private:
  json node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> consumed_;
};

nn::OptimConfig parse_optim(const json& node, const std::string& path,
                            std::vector<std::string>& errors, nn::OptimConfig defaults) {
  Block b(node, path, errors);
  const std::string algo = b.get_enum(
      "algorithm",
      defaults.algo == nn::OptimConfig::Algo::adam ? "adam" : "sgd_momentum",
      {"sgd_momentum", "adam"});
  defaults.algo =
      algo == "adam" ? nn::OptimConfig::Algo::adam : nn::OptimConfig::Algo::sgd_momentum;
  defaults.learning_rate = b.get("learning_rate", defaults.learning_rate);
  defaults.momentum = b.get("momentum", defaults.momentum);
  defaults.beta1 = b.get("beta1", defaults.beta1);
  defaults.beta2 = b.get("beta2", defaults.beta2);
  defaults.adam_eps = b.get("adam_eps", defaults.adam_eps);
  defaults.weight_decay = b.get("weight_decay", defaults.weight_decay);
  const std::string sched = b.get_enum("schedule",
                                       defaults.schedule == nn::OptimConfig::Schedule::cosine
                                           ? "cosine"
                                           : (defaults.schedule == nn::OptimConfig::Schedule::step
                                                  ? "step"
                                                  : "none"),
                                       {"none", "cosine", "step"});
  defaults.schedule = sched == "cosine" ? nn::OptimConfig::Schedule::cosine
                      : sched == "step" ? nn::OptimConfig::Schedule::step
                                        : nn::OptimConfig::Schedule::none;
  defaults.total_steps = b.get("total_steps", defaults.total_steps);
  defaults.milestones = b.get("milestones", defaults.milestones);
  defaults.step_gamma = b.get("step_gamma", defaults.step_gamma);
  if (defaults.learning_rate <= 0.0) errors.push_back(path + ".learning_rate: must be > 0");
  b.finish();
  return defaults;
}

json emit_optim(const nn::OptimConfig& optim) {
  return {{"algorithm", optim.algo == nn::OptimConfig::Algo::adam ? "adam" : "sgd_momentum"},
          {"learning_rate", optim.learning_rate},
          {"momentum", optim.momentum},
          {"beta1", optim.beta1},
          {"beta2", optim.beta2},
          {"adam_eps", optim.adam_eps},
          {"weight_decay", optim.weight_decay},
          {"schedule", optim.schedule == nn::OptimConfig::Schedule::cosine
                           ? "cosine"
                           : (optim.schedule == nn::OptimConfig::Schedule::step ? "step" : "none")},
          {"total_steps", optim.total_steps},
          {"milestones", optim.milestones},
          {"step_gamma", optim.step_gamma}};
}

AugmentConfig parse_augment(const json& node, const std::string& path,
                            std::vector<std::string>& errors, AugmentConfig defaults) {
  Block b(node, path, errors);
  defaults.crop_scale_min = b.get("crop_scale_min", defaults.crop_scale_min);
  defaults.crop_scale_max = b.get("crop_scale_max", defaults.crop_scale_max);
  defaults.flip_prob = b.get("flip_prob", defaults.flip_prob);
  defaults.brightness = b.get("brightness", defaults.brightness);
  defaults.contrast = b.get("contrast", defaults.contrast);
  defaults.saturation = b.get("saturation", defaults.saturation);
  defaults.grayscale_prob = b.get("grayscale_prob", defaults.grayscale_prob);
  defaults.blur_prob = b.get("blur_prob", defaults.blur_prob);
  defaults.blur_sigma_min = b.get("blur_sigma_min", defaults.blur_sigma_min);
  defaults.blur_sigma_max = b.get("blur_sigma_max", defaults.blur_sigma_max);
  const std::string mode =
      b.get_enum("mode", defaults.mode == AugmentConfig::Mode::strong ? "strong" : "standard",
                 {"strong", "standard"});
  defaults.mode =
      mode == "strong" ? AugmentConfig::Mode::strong : AugmentConfig::Mode::standard;
  try {
    defaults.validate();
  } catch (const ConfigError& e) {
    errors.push_back(path + ": " + e.what());
  }
  b.finish();
  return defaults;
}

json emit_augment(const AugmentConfig& aug) {
  return {{"crop_scale_min", aug.crop_scale_min},
          {"crop_scale_max", aug.crop_scale_max},
          {"flip_prob", aug.flip_prob},
          {"brightness", aug.brightness},
          {"contrast", aug.contrast},
          {"saturation", aug.saturation},
          {"grayscale_prob", aug.grayscale_prob},
          {"blur_prob", aug.blur_prob},
          {"blur_sigma_min", aug.blur_sigma_min},
          {"blur_sigma_max", aug.blur_sigma_max},
          {"mode", aug.mode == AugmentConfig::Mode::strong ? "strong" : "standard"}};
}

}  // namespace

ExperimentConfig validate_config(const json& raw) {
  std::vector<std::string> errors;
  ExperimentConfig out;

  Block root(raw, "config", errors);
  const int version = root.get("config_version", 1);
  if (version != 1) errors.push_back("config.config_version: unsupported version");
  out.seed = root.get<std::uint64_t>("seed", 0);
  out.output_dir = root.get<std::string>("output_dir", "runs/out");

  {
    Block b(root.child("dataset"), "config.dataset", errors);
    out.dataset.source = b.get_enum("source", "synthetic", {"synthetic", "directory"});
    {
      Block s(b.child("synthetic"), "config.dataset.synthetic", errors);
      out.dataset.synthetic.num_classes = s.get("num_classes", 4);
      out.dataset.synthetic.per_class = s.get("per_class", 500);
      out.dataset.synthetic.image_size = s.get("image_size", 16);
      out.dataset.synthetic.motif_kind = s.get<std::string>("motif_kind", "shapes");
      if (out.dataset.synthetic.num_classes < 2)
        errors.push_back("config.dataset.synthetic.num_classes: must be >= 2");
      if (out.dataset.synthetic.per_class < 1)
        errors.push_back("config.dataset.synthetic.per_class: must be >= 1");
      if (out.dataset.synthetic.image_size < 8)
        errors.push_back("config.dataset.synthetic.image_size: must be >= 8");
      s.finish();
    }
    out.dataset.path = b.get<std::string>("path", "");
    if (out.dataset.source == "directory") {
      if (out.dataset.path.empty())
        errors.push_back("config.dataset.path: required when source is 'directory'");
      else if (!fs::exists(out.dataset.path))
        errors.push_back("config.dataset.path: '" + out.dataset.path + "' does not exist");
    }
    b.finish();
  }

  {
    const json attack_node = root.child("attack");
    Block b(attack_node, "config.attack", errors);
    if (!attack_node.contains("generator")) {
      errors.push_back(
          "config.attack.generator: required (none|badnets|blended|wanet|label_consistent|"
          "adaptive_replace)");
    }
    out.attack.generator = b.get_enum(
        "generator", "none",
        {"none", "badnets", "blended", "wanet", "label_consistent", "adaptive_replace"});
    out.attack.mode = b.get_enum(
        "mode", out.attack.generator == "label_consistent" ? "clean_label" : "poison_label",
        {"poison_label", "clean_label"});
    if (out.attack.mode == "clean_label" && out.attack.generator != "label_consistent" &&
        out.attack.generator != "none")
      errors.push_back("config.attack.mode: clean_label pairs only with label_consistent");
    if (out.attack.generator == "label_consistent" && out.attack.mode != "clean_label")
      errors.push_back("config.attack.mode: label_consistent requires clean_label");
    out.attack.poisoning_rate =
        b.get("poisoning_rate", out.attack.mode == "clean_label" ? 0.025 : 0.05);
    if (out.attack.poisoning_rate < 0.0 || out.attack.poisoning_rate > 1.0)
      errors.push_back("config.attack.poisoning_rate: must lie in [0, 1]");
    out.attack.target_label = b.get("target_label", 3);

    {
      Block p(b.child("patch"), "config.attack.patch", errors);
      out.attack.patch.height = p.get("height", 2);
      out.attack.patch.width = p.get("width", 2);
      out.attack.patch.position =
          p.get_enum("position", "lower_right", {"lower_right", "upper_left"});
      out.attack.patch.value = p.get("value", 1.0);
      p.finish();
    }
    {
      Block p(b.child("blend"), "config.attack.blend", errors);
      out.attack.blend.ratio = p.get("ratio", 0.1);
      out.attack.blend.trigger_path = p.get<std::string>("trigger_path", "");
      if (out.attack.blend.ratio < 0.0 || out.attack.blend.ratio > 1.0)
        errors.push_back("config.attack.blend.ratio: must lie in [0, 1]");
      if (!out.attack.blend.trigger_path.empty() && !fs::exists(out.attack.blend.trigger_path))
        errors.push_back("config.attack.blend.trigger_path: '" + out.attack.blend.trigger_path +
                         "' does not exist");
      p.finish();
    }
    {
      Block p(b.child("warp"), "config.attack.warp", errors);
      out.attack.warp.grid_size = p.get("grid_size", 4);
      out.attack.warp.strength = p.get("strength", 0.5);
      out.attack.warp.noise_rate = p.get("noise_rate", 0.2);
      p.finish();
    }
    {
      Block p(b.child("pgd"), "config.attack.pgd", errors);
      out.attack.pgd.epsilon = p.get("epsilon", 16.0);
      out.attack.pgd.steps = p.get("steps", 10);
      out.attack.pgd.step_size = p.get("step_size", 0.0);
      p.finish();
    }
    {
      Block p(b.child("surrogate"), "config.attack.surrogate", errors);
      out.attack.surrogate.epochs = p.get("epochs", 10);
      p.finish();
    }
    {
      Block p(b.child("replace"), "config.attack.replace", errors);
      out.attack.replace.trigger_path = p.get<std::string>("trigger_path", "");
      if (out.attack.generator == "adaptive_replace") {
        if (out.attack.replace.trigger_path.empty())
          errors.push_back("config.attack.replace.trigger_path: required for adaptive_replace");
        else if (!fs::exists(out.attack.replace.trigger_path))
          errors.push_back("config.attack.replace.trigger_path: '" +
                           out.attack.replace.trigger_path + "' does not exist");
      }
      p.finish();
    }
    b.finish();
  }

  {
    Block b(root.child("model"), "config.model", errors);
    out.model_channels = b.get("channels", std::vector<int>{32, 64, 128, 256});
    out.model_projection_dim = b.get("projection_dim", 128);
    if (out.model_channels.empty()) errors.push_back("config.model.channels: must be nonempty");
    for (int c : out.model_channels)
      if (c <= 0) errors.push_back("config.model.channels: entries must be positive");
    if (out.model_projection_dim <= 0)
      errors.push_back("config.model.projection_dim: must be positive");
    b.finish();
  }

  {
    const json defense_node = root.child("defense");
    Block b(defense_node, "config.defense", errors);
    out.defense.kind = b.get_enum("kind", "dbd", {"dbd", "none"});
    out.defense.alpha_percent = b.get("alpha_percent", 50.0);
    if (out.defense.alpha_percent < 0.0 || out.defense.alpha_percent > 100.0)
      errors.push_back("config.defense.alpha_percent: must lie in [0, 100]");

    {
      const json node = b.child("stage1");
      Block s(node, "config.defense.stage1", errors);
      out.defense.stage1.epochs = s.get("epochs", 100);
      out.defense.stage1.batch_size = s.get("batch_size", 128);
      out.defense.stage1.tau = s.get("tau", 0.5);
      if (out.defense.stage1.tau <= 0.0)
        errors.push_back("config.defense.stage1.tau: must be > 0");
      out.defense.stage1.optim = parse_optim(s.child("optimizer"),
                                             "config.defense.stage1.optimizer", errors,
                                             Stage1Config{}.optim);
      out.defense.stage1.augment =
          parse_augment(s.child("augment"), "config.defense.stage1.augment", errors,
                        AugmentConfig::strong_default());
      s.finish();
    }
    {
      const json node = b.child("stage2");
      Block s(node, "config.defense.stage2", errors);
      out.defense.stage2.epochs = s.get("epochs", 10);
      out.defense.stage2.batch_size = s.get("batch_size", 128);
      out.defense.stage2.sce_alpha = s.get("sce_alpha", 0.1);
      out.defense.stage2.sce_beta = s.get("sce_beta", 1.0);
      out.defense.stage2.log_clamp = s.get("log_clamp", -4.0);
      if (out.defense.stage2.log_clamp >= 0.0)
        errors.push_back("config.defense.stage2.log_clamp: must be < 0");
      out.defense.stage2.optim = parse_optim(s.child("optimizer"),
                                             "config.defense.stage2.optimizer", errors,
                                             Stage2Config{}.optim);
      s.finish();
    }
    {
      const json node = b.child("stage3");
      Block s(node, "config.defense.stage3", errors);
      out.defense.stage3.epochs = s.get("epochs", 30);
      out.defense.stage3.batch_size = s.get("batch_size", 64);
      out.defense.stage3.refilter = s.get("refilter", true);
      out.defense.stage3.lambda_u_rampup_epochs = s.get("lambda_u_rampup_epochs", 0);
      {
        Block l(s.child("loss"), "config.defense.stage3.loss", errors);
        out.defense.stage3.loss.lambda_u = l.get("lambda_u", 15.0);
        out.defense.stage3.loss.sharpen_T = l.get("sharpen_T", 0.5);
        out.defense.stage3.loss.mix_beta_alpha = l.get("mix_beta_alpha", 0.75);
        out.defense.stage3.loss.guess_augments = l.get("guess_augments", 2);
        l.finish();
      }
      out.defense.stage3.optim = parse_optim(s.child("optimizer"),
                                             "config.defense.stage3.optimizer", errors,
                                             Stage3Config{}.optim);
      out.defense.stage3.augment =
          parse_augment(s.child("augment"), "config.defense.stage3.augment", errors,
                        AugmentConfig::standard_default());
      s.finish();
    }
    {
      const json node = b.child("supervised");
      Block s(node, "config.defense.supervised", errors);
      out.defense.supervised.epochs = s.get("epochs", 30);
      out.defense.supervised.batch_size = s.get("batch_size", 128);
      out.defense.supervised.optim = parse_optim(s.child("optimizer"),
                                                 "config.defense.supervised.optimizer", errors,
                                                 SupervisedConfig{}.optim);
      out.defense.supervised.augment =
          parse_augment(s.child("augment"), "config.defense.supervised.augment", errors,
                        AugmentConfig::standard_default());
      s.finish();
    }

    // Refiltering shares the split rate and the stage-2 robust-loss shape.
    out.defense.stage3.alpha_percent = out.defense.alpha_percent;
    out.defense.stage3.loss.sce_alpha = out.defense.stage2.sce_alpha;
    out.defense.stage3.loss.sce_beta = out.defense.stage2.sce_beta;
    out.defense.stage3.loss.log_clamp = out.defense.stage2.log_clamp;
    out.defense.stage3.loss.tau = out.defense.stage1.tau;
    try {
      out.defense.stage3.loss.validate();
    } catch (const ConfigError& e) {
      errors.push_back(std::string("config.defense.stage3.loss: ") + e.what());
    }
    b.finish();
  }

  {
    Block b(root.child("evaluation"), "config.evaluation", errors);
    out.evaluation.test_per_class = b.get("test_per_class", 100);
    out.evaluation.test_path = b.get<std::string>("test_path", "");
    out.evaluation.probe = b.get("probe", true);
    out.evaluation.filtering = b.get("filtering", true);
    out.evaluation.shrinkpad_rate = b.get("shrinkpad_rate", 0.0);
    out.evaluation.seed = b.get<std::uint64_t>("seed", 0);
    if (out.evaluation.test_per_class < 1)
      errors.push_back("config.evaluation.test_per_class: must be >= 1");
    if (!out.evaluation.test_path.empty() && !fs::exists(out.evaluation.test_path))
      errors.push_back("config.evaluation.test_path: '" + out.evaluation.test_path +
                       "' does not exist");
    if (out.evaluation.shrinkpad_rate < 0.0 || out.evaluation.shrinkpad_rate >= 1.0)
      errors.push_back("config.evaluation.shrinkpad_rate: must lie in [0, 1)");
    b.finish();
  }

  {
    Block b(root.child("adaptive"), "config.adaptive", errors);
    out.adaptive.spec.poison_count = b.get("poison_count", 64);
    out.adaptive.spec.steps = b.get("steps", 100);
    out.adaptive.spec.learning_rate = b.get("learning_rate", 0.1);
    out.adaptive.backbone_checkpoint = b.get<std::string>("backbone_checkpoint", "");
    if (!out.adaptive.backbone_checkpoint.empty() &&
        !fs::exists(out.adaptive.backbone_checkpoint))
      errors.push_back("config.adaptive.backbone_checkpoint: '" +
                       out.adaptive.backbone_checkpoint + "' does not exist");
    {
      const json node = b.child("backbone_stage1");
      Block s(node, "config.adaptive.backbone_stage1", errors);
      out.adaptive.backbone_stage1.epochs = s.get("epochs", 100);
      out.adaptive.backbone_stage1.batch_size = s.get("batch_size", 128);
      out.adaptive.backbone_stage1.tau = s.get("tau", 0.5);
      out.adaptive.backbone_stage1.optim =
          parse_optim(s.child("optimizer"), "config.adaptive.backbone_stage1.optimizer", errors,
                      Stage1Config{}.optim);
      out.adaptive.backbone_stage1.augment =
          parse_augment(s.child("augment"), "config.adaptive.backbone_stage1.augment", errors,
                        AugmentConfig::strong_default());
      s.finish();
    }
    b.finish();
  }

  root.finish();

  if (!errors.empty()) {
    std::string joined = "configuration invalid:";
    for (const auto& e : errors) joined += "\n  - " + e;
    throw ConfigError(joined);
  }

  // Emit the fully resolved document.
  json resolved;
  resolved["config_version"] = 1;
  resolved["seed"] = out.seed;
  resolved["output_dir"] = out.output_dir;
  resolved["dataset"] = {{"source", out.dataset.source},
                         {"synthetic",
                          {{"num_classes", out.dataset.synthetic.num_classes},
                           {"per_class", out.dataset.synthetic.per_class},
                           {"image_size", out.dataset.synthetic.image_size},
                           {"motif_kind", out.dataset.synthetic.motif_kind}}},
                         {"path", out.dataset.path}};
  resolved["attack"] = {
      {"generator", out.attack.generator},
      {"mode", out.attack.mode},
      {"poisoning_rate", out.attack.poisoning_rate},
      {"target_label", out.attack.target_label},
      {"patch",
       {{"height", out.attack.patch.height},
        {"width", out.attack.patch.width},
        {"position", out.attack.patch.position},
        {"value", out.attack.patch.value}}},
      {"blend", {{"ratio", out.attack.blend.ratio}, {"trigger_path", out.attack.blend.trigger_path}}},
      {"warp",
       {{"grid_size", out.attack.warp.grid_size},
        {"strength", out.attack.warp.strength},
        {"noise_rate", out.attack.warp.noise_rate}}},
      {"pgd",
       {{"epsilon", out.attack.pgd.epsilon},
        {"steps", out.attack.pgd.steps},
        {"step_size", out.attack.pgd.step_size}}},
      {"surrogate", {{"epochs", out.attack.surrogate.epochs}}},
      {"replace", {{"trigger_path", out.attack.replace.trigger_path}}}};
  resolved["model"] = {{"channels", out.model_channels},
                       {"projection_dim", out.model_projection_dim}};
  resolved["defense"] = {
      {"kind", out.defense.kind},
      {"alpha_percent", out.defense.alpha_percent},
      {"stage1",
       {{"epochs", out.defense.stage1.epochs},
        {"batch_size", out.defense.stage1.batch_size},
        {"tau", out.defense.stage1.tau},
        {"optimizer", emit_optim(out.defense.stage1.optim)},
        {"augment", emit_augment(out.defense.stage1.augment)}}},
      {"stage2",
       {{"epochs", out.defense.stage2.epochs},
        {"batch_size", out.defense.stage2.batch_size},
        {"sce_alpha", out.defense.stage2.sce_alpha},
        {"sce_beta", out.defense.stage2.sce_beta},
        {"log_clamp", out.defense.stage2.log_clamp},
        {"optimizer", emit_optim(out.defense.stage2.optim)}}},
      {"stage3",
       {{"epochs", out.defense.stage3.epochs},
        {"batch_size", out.defense.stage3.batch_size},
        {"refilter", out.defense.stage3.refilter},
        {"lambda_u_rampup_epochs", out.defense.stage3.lambda_u_rampup_epochs},
        {"loss",
         {{"lambda_u", out.defense.stage3.loss.lambda_u},
          {"sharpen_T", out.defense.stage3.loss.sharpen_T},
          {"mix_beta_alpha", out.defense.stage3.loss.mix_beta_alpha},
          {"guess_augments", out.defense.stage3.loss.guess_augments}}},
        {"optimizer", emit_optim(out.defense.stage3.optim)},
        {"augment", emit_augment(out.defense.stage3.augment)}}},
      {"supervised",
       {{"epochs", out.defense.supervised.epochs},
        {"batch_size", out.defense.supervised.batch_size},
        {"optimizer", emit_optim(out.defense.supervised.optim)},
        {"augment", emit_augment(out.defense.supervised.augment)}}}};
  resolved["evaluation"] = {{"test_per_class", out.evaluation.test_per_class},
                            {"test_path", out.evaluation.test_path},
                            {"probe", out.evaluation.probe},
                            {"filtering", out.evaluation.filtering},
                            {"shrinkpad_rate", out.evaluation.shrinkpad_rate},
                            {"seed", out.evaluation.seed}};
  resolved["adaptive"] = {
      {"poison_count", out.adaptive.spec.poison_count},
      {"steps", out.adaptive.spec.steps},
      {"learning_rate", out.adaptive.spec.learning_rate},
      {"backbone_checkpoint", out.adaptive.backbone_checkpoint},
      {"backbone_stage1",
       {{"epochs", out.adaptive.backbone_stage1.epochs},
        {"batch_size", out.adaptive.backbone_stage1.batch_size},
        {"tau", out.adaptive.backbone_stage1.tau},
        {"optimizer", emit_optim(out.adaptive.backbone_stage1.optim)},
        {"augment", emit_augment(out.adaptive.backbone_stage1.augment)}}}};
  out.resolved = std::move(resolved);
  return out;
}

ExperimentConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config", path.string());
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return validate_config(raw);
}

}  // namespace dbd
