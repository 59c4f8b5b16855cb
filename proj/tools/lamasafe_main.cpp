#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "lamasafe/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"lamasafe: constrained multi-agent RL with natural-language constraints"};
  app.require_subcommand(1);

  std::string config_path = "configs/grid_small_mappo.json";
  std::string out_override;
  std::string provider_override;
  std::vector<std::string> overrides;
  std::int64_t seed_override = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file (JSON, comments allowed)");
    cmd->add_option("--seed", seed_override, "run a single seed instead of the config's list");
    cmd->add_option("--out", out_override, "output directory override");
    cmd->add_option("--provider", provider_override, "violation provider: rule or remote")
        ->check(CLI::IsMember({"rule", "remote"}));
    cmd->add_option("--override", overrides, "config override, key.path=value (repeatable)");
  };

  auto* finetune = app.add_subcommand("finetune", "fine-tune the constraint encoder");
  add_common(finetune);
  auto* train = app.add_subcommand("train", "run the configured training experiment");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a training checkpoint");
  add_common(eval);
  std::string checkpoint_dir;
  int eval_episodes = 10;
  eval->add_option("--checkpoint", checkpoint_dir, "checkpoint directory (run_dir/ckpt)")
      ->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  auto* corpus_check = app.add_subcommand("corpus-check", "classify a constraint corpus");
  std::string corpus_path;
  corpus_check->add_option("corpus", corpus_path, "corpus file")->required();
  auto* oracle_audit =
      app.add_subcommand("oracle-audit", "rule-oracle vs ground-truth agreement audit");
  add_common(oracle_audit);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // help/version exit cleanly; anything else is a configuration error
    return code == 0 ? 0 : lamasafe::cli::kExitConfigError;
  }

  try {
    if (gradcheck->parsed()) return lamasafe::cli::run_gradcheck();
    if (corpus_check->parsed()) return lamasafe::cli::run_corpus_check(corpus_path);

    lamasafe::cli::ExperimentConfig cfg;
    try {
      auto j = lamasafe::cli::load_config_json(config_path, overrides);
      if (seed_override >= 0) j["seeds"] = {static_cast<std::uint64_t>(seed_override)};
      if (!out_override.empty()) j["out_dir"] = out_override;
      if (!provider_override.empty()) j["provider"]["kind"] = provider_override;
      cfg = lamasafe::cli::parse_config(j);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return lamasafe::cli::kExitConfigError;
    }

    if (finetune->parsed()) return lamasafe::cli::run_finetune(cfg);
    if (train->parsed()) return lamasafe::cli::run_train(cfg);
    if (eval->parsed()) return lamasafe::cli::run_eval(cfg, checkpoint_dir, eval_episodes);
    if (oracle_audit->parsed()) return lamasafe::cli::run_oracle_audit(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lamasafe::cli::kExitRuntimeError;
  }
  return lamasafe::cli::kExitOk;
}
