#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamasafe/costlm.hpp"
#include "lamasafe/trainer.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::cli {

/// Everything a run needs, resolved from the config file plus CLI overrides.
struct ExperimentConfig {
  marl::EnvSpec env;
  marl::TrainConfig train;
  std::string corpus_train_path;
  std::string corpus_finetune_path;
  costlm::ProviderConfig provider;
  // encoder settings / checkpoint
  std::string encoder_checkpoint;
  int encoder_vocab_dim = 1024;
  int encoder_dim = 64;
  double encoder_margin = 0.2;
  double encoder_learning_rate = 1.0;
  std::uint64_t encoder_init_seed = 7;
  int finetune_triplets = 30;
  int finetune_rounds = 95;
  std::uint64_t finetune_seed = 20240501;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string resume_from;
  int audit_board_size = 5;
  bool audit_corrupt_lexicon = false;

  nlohmann::json raw;  // effective config, written into run directories
};

/// Parse "a.b.c=value" override paths onto the config JSON. Values parse as
/// JSON when possible, otherwise as strings.
inline void apply_override(nlohmann::json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key.path=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw std::invalid_argument("bad override path: " + path);
    if (dot == std::string::npos) {
      auto parsed = nlohmann::json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline nlohmann::json load_config_json(const std::string& path,
                                       const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  // comments allowed in config files
  nlohmann::json j = nlohmann::json::parse(ss.str(), nullptr, true, true);
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  c.raw = j;

  const auto env = j.value("environment", nlohmann::json::object());
  const std::string kind = env.value("kind", "grid");
  if (kind == "grid")
    c.env.kind = marl::EnvKind::Grid;
  else if (kind == "goal")
    c.env.kind = marl::EnvKind::Goal;
  else
    throw std::invalid_argument("environment.kind must be grid or goal");
  const std::string layout = env.value("layout", "random");
  if (layout == "random")
    c.env.layout = marl::GridLayout::Random;
  else if (layout == "onepath")
    c.env.layout = marl::GridLayout::OnePath;
  else
    throw std::invalid_argument("environment.layout must be random or onepath");
  c.env.grid_size = env.value("size", 10);
  c.env.hazard_count = env.value("hazards", 20);
  const std::string difficulty = env.value("difficulty", "easy");
  if (difficulty == "easy")
    c.env.difficulty.level = goal::Difficulty::Easy;
  else if (difficulty == "medium")
    c.env.difficulty.level = goal::Difficulty::Medium;
  else if (difficulty == "hard")
    c.env.difficulty.level = goal::Difficulty::Hard;
  else
    throw std::invalid_argument("environment.difficulty must be easy, medium or hard");
  c.env.goal_hazard_override = env.value("hazard_override", -1);
  c.env.goal_vase_override = env.value("vase_override", -1);
  c.env.n_agents = j.value("n_agents", 2);
  if (c.env.n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");

  c.train.algorithm = marl::algorithm_from_string(j.value("algorithm", "small-mappo"));
  const auto t = j.value("train", nlohmann::json::object());
  c.train.gamma = t.value("gamma", 0.95);
  c.train.gae_lambda = t.value("gae_lambda", 0.95);
  c.train.clip_eps = t.value("clip_eps", 0.2);
  c.train.ppo_epochs = t.value("ppo_epochs", 5);
  c.train.batch_size = t.value("batch_size", 1024);
  c.train.steps_per_update = t.value("steps_per_update", 100);
  c.train.actor_lr = t.value("actor_lr", 9e-5);
  c.train.critic_lr = t.value("critic_lr", 3e-4);
  c.train.entropy_coef = t.value("entropy_coef", 0.01);
  c.train.eval_interval = t.value("eval_interval", 1000);
  c.train.eval_episodes = t.value("eval_episodes", 10);
  c.train.lagrange_init = t.value("lagrangian_coef", 0.78);
  c.train.lagrange_lr = t.value("lagrangian_lr", 1e-5);
  c.train.budget = t.value("budget", 0.0);
  c.train.normalize_advantages = t.value("normalize_advantages", true);
  c.train.grad_clip_norm = t.value("grad_clip_norm", 0.0);
  c.train.hidden_dim = t.value("hidden_dim", 64);
  c.train.hidden_layers = t.value("hidden_layers", 2);
  c.train.total_steps = t.value("total_steps", static_cast<long long>(100000));
  if (!(c.train.gamma >= 0.0 && c.train.gamma < 1.0))
    throw std::invalid_argument("train.gamma must be in [0,1)");
  if (c.train.ppo_epochs <= 0 || c.train.batch_size <= 0 || c.train.steps_per_update <= 0)
    throw std::invalid_argument("train counts must be positive");

  const auto corpus = j.value("corpus", nlohmann::json::object());
  c.corpus_train_path = corpus.value("train", "corpora/lamasafe_grid.txt");
  c.corpus_finetune_path = corpus.value("finetune", "corpora/lamasafe_grid_finetune.txt");

  const auto p = j.value("provider", nlohmann::json::object());
  const std::string pk = p.value("kind", "rule");
  if (pk == "rule")
    c.provider.kind = costlm::ProviderKind::RuleOracle;
  else if (pk == "remote")
    c.provider.kind = costlm::ProviderKind::Remote;
  else
    throw std::invalid_argument("provider.kind must be rule or remote");
  c.provider.endpoint = p.value("endpoint", "");
  c.provider.auth_token = p.value("auth_token", "");
  c.provider.timeout_seconds = p.value("timeout_seconds", 10.0);
  c.provider.max_retries = p.value("max_retries", 2);
  c.provider.max_in_flight = p.value("max_in_flight", 4);
  c.provider.cache_path = p.value("cache_path", "");
  c.provider.prompt_template_path = p.value("prompt_template", "");

  const auto e = j.value("encoder", nlohmann::json::object());
  c.encoder_checkpoint = e.value("checkpoint", "");
  c.encoder_vocab_dim = e.value("vocab_dim", 1024);
  c.encoder_dim = e.value("dim", 64);
  c.encoder_margin = e.value("margin", 0.2);
  c.encoder_learning_rate = e.value("learning_rate", 1.0);
  c.encoder_init_seed = e.value("init_seed", static_cast<std::uint64_t>(7));
  c.finetune_triplets = e.value("triplets", 30);
  c.finetune_rounds = e.value("rounds", 95);
  c.finetune_seed = e.value("finetune_seed", static_cast<std::uint64_t>(20240501));

  if (j.contains("seeds"))
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  else
    c.seeds = {1, 2, 3};
  if (c.seeds.empty()) throw std::invalid_argument("seeds must be non-empty");

  c.out_dir = j.value("out_dir", "runs/default");
  c.resume_from = j.value("resume_from", "");
  const auto audit = j.value("audit", nlohmann::json::object());
  c.audit_board_size = audit.value("board_size", 5);
  c.audit_corrupt_lexicon = audit.value("corrupt_lexicon", false);
  return c;
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  return parse_config(load_config_json(path, overrides));
}

/// Build (or load) the encoder named by the config.
inline embed::EncoderState make_encoder(const ExperimentConfig& c) {
  if (!c.encoder_checkpoint.empty() && std::ifstream(c.encoder_checkpoint).good())
    return embed::EncoderState::load(c.encoder_checkpoint);
  return embed::EncoderState(c.encoder_vocab_dim, c.encoder_dim, c.encoder_margin,
                             c.encoder_learning_rate, c.encoder_init_seed);
}

}  // namespace lamasafe::cli
