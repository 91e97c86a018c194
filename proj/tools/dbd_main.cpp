#include <CLI11.hpp>
#include <iostream>

#include "dbd/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_quiet = true) {
  cmd->add_option("--config", args.config_path, "experiment config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "global seed (overrides config)");
  if (with_quiet) cmd->add_flag("--quiet", args.quiet, "do not echo the run log");
}

dbd::ExperimentConfig load(const CommonArgs& args) {
  dbd::ExperimentConfig config = dbd::load_config_file(args.config_path);
  if (args.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(args.seed);
    config.resolved["seed"] = config.seed;
  }
  if (!args.out_dir.empty()) {
    config.output_dir = args.out_dir;
    config.resolved["output_dir"] = args.out_dir;
  }
  return config;
}

void print_metrics(const nlohmann::json& records) {
  for (const auto& record : records) std::cout << record.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poisoning attacks and the decoupled three-stage backdoor defense"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checkpoint_dir;

  CLI::App* run = app.add_subcommand("run", "full experiment: poison, train, evaluate");
  add_common(run, args);

  CLI::App* poison = app.add_subcommand("poison-only", "emit the poisoned dataset and stop");
  add_common(poison, args, false);

  CLI::App* eval_cmd = app.add_subcommand("eval-only", "metrics for a saved checkpoint");
  add_common(eval_cmd, args, false);
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI::App* adaptive = app.add_subcommand("adaptive-attack", "optimize a trigger on a backbone");
  add_common(adaptive, args);

  CLI::App* probe = app.add_subcommand("probe", "feature-space cluster probe of a checkpoint");
  add_common(probe, args, false);
  probe->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    const dbd::ExperimentConfig config = load(args);
    if (run->parsed()) {
      const dbd::RunResult result = dbd::run_experiment(config, !args.quiet);
      print_metrics(result.metrics);
      std::cout << "run directory: " << result.run_dir.string() << "\n";
    } else if (poison->parsed()) {
      std::cout << "poisoned dataset: " << dbd::poison_only(config).string() << "\n";
    } else if (eval_cmd->parsed()) {
      print_metrics(dbd::eval_only(config, checkpoint_dir).metrics);
    } else if (adaptive->parsed()) {
      std::cout << "trigger: " << dbd::run_adaptive_attack(config, !args.quiet).string() << "\n";
    } else if (probe->parsed()) {
      print_metrics(dbd::probe_only(config, checkpoint_dir).metrics);
    }
  } catch (const dbd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
