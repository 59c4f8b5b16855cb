#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lamasafe/corpus.hpp"
#include "lamasafe/marl.hpp"

namespace lamasafe::marl {

struct TrainSetup {
  TrainConfig config;
  EnvSpec env;
  std::uint64_t seed = 1;
  const text::ConstraintCorpus* corpus = nullptr;
  embed::EncoderState* encoder = nullptr;  // shared read-only during training
  costlm::ProviderConfig provider;
  std::string run_dir;       // metrics + checkpoints; empty = no file output
  std::string resume_from;   // checkpoint dir to continue from
  /// Optional hook called after every update with the serialized policy and
  /// value parameters (the reduction-property harness hashes these).
  std::function<void(const Nets&)> on_update;
};

struct EvalReport {
  double reward_mean = 0.0;
  double cost_mean = 0.0;                  // ground-truth episode cost, all agents
  double violation_step_fraction = 0.0;    // (agent, step) pairs with truth cost > 0
  std::vector<double> episode_rewards;
  std::vector<double> episode_costs;
  std::vector<std::string> episode_constraints;  // condensed form per episode
};

struct TrainSummary {
  long long steps = 0;
  long long episodes = 0;
  double final_eval_reward = 0.0;
  double final_eval_cost = 0.0;
  double lambda = 0.0;
};

namespace detail {

inline std::vector<double> concat_features(const std::vector<double>& numeric,
                                           const std::vector<double>& embedding) {
  std::vector<double> out;
  out.reserve(numeric.size() + embedding.size());
  out.insert(out.end(), numeric.begin(), numeric.end());
  out.insert(out.end(), embedding.begin(), embedding.end());
  return out;
}

inline core::JointAction to_joint(const Environment& env,
                                  const std::vector<std::vector<double>>& actions) {
  core::JointAction joint;
  for (const auto& a : actions) {
    if (env.discrete())
      joint.actions.emplace_back(static_cast<int>(a[0]));
    else
      joint.actions.emplace_back(std::array<double, 2>{a[0], a[1]});
  }
  return joint;
}

}  // namespace detail

/// Deterministic-policy evaluation over `episodes` fresh episodes, reporting
/// mean team reward and mean ground-truth episode cost. Consumes only the
/// derived eval streams so it never perturbs training randomness.
inline EvalReport evaluate(const EnvSpec& env_spec, const Nets& nets,
                           const text::ConstraintCorpus& corpus, embed::EncoderState& encoder,
                           const costlm::ProviderConfig& provider, int episodes,
                           const Rng& eval_master) {
  EvalReport report;
  long long violating_pairs = 0, total_pairs = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    Environment env(env_spec);
    const Rng ep_rng = eval_master.derive("episode", static_cast<std::uint64_t>(ep));
    core::LanguageConstraint constraint =
        core::sample_constraint(corpus, ep_rng.derive("constraint").next_u64());
    costlm::prepare_constraint(constraint, encoder, provider);
    env.reset(ep_rng.derive("layout").next_u64(), constraint.classes);

    double ep_reward = 0.0, ep_cost = 0.0;
    while (!env.done()) {
      std::vector<std::vector<double>> actions;
      for (int a = 0; a < env.n_agents(); ++a) {
        const auto features =
            detail::concat_features(env.numeric_features(a), constraint.embedding);
        actions.push_back(nn::deterministic_action(nets.policies[static_cast<std::size_t>(a)],
                                                   features));
      }
      const core::StepOutcome out = env.step(detail::to_joint(env, actions));
      ep_reward += out.team_reward;
      for (const double c : out.cost_truth) {
        ep_cost += c;
        violating_pairs += (c > 0.0) ? 1 : 0;
        total_pairs += 1;
      }
    }
    report.episode_rewards.push_back(ep_reward);
    report.episode_costs.push_back(ep_cost);
    report.episode_constraints.push_back(constraint.condensed);
  }
  for (const double r : report.episode_rewards) report.reward_mean += r;
  for (const double c : report.episode_costs) report.cost_mean += c;
  report.reward_mean /= static_cast<double>(episodes);
  report.cost_mean /= static_cast<double>(episodes);
  report.violation_step_fraction =
      total_pairs > 0 ? static_cast<double>(violating_pairs) / static_cast<double>(total_pairs)
                      : 0.0;
  return report;
}

namespace detail {

inline void save_checkpoint(const std::string& dir, const Nets& nets, const LagrangeState& lag,
                            const Rng& action_rng, const Rng& minibatch_rng, const Rng& happo_rng,
                            long long step, long long episode, long long eval_counter) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "nets");
  for (std::size_t a = 0; a < nets.policies.size(); ++a) {
    nlohmann::json j = nn::head_to_json(nets.policies[a]);
    j["adam"] = nn::adam_to_json(nets.policy_opts[a]);
    j["log_std_adam"] = {{"m", nets.log_std_opts[a].m},
                         {"v", nets.log_std_opts[a].v},
                         {"lr", nets.log_std_opts[a].lr},
                         {"step_count", nets.log_std_opts[a].step_count}};
    std::ofstream((fs::path(dir) / "nets" / ("policy_" + std::to_string(a) + ".ckpt")))
        << j.dump(2) << "\n";
  }
  {
    nlohmann::json j = nn::mlp_to_json(nets.value);
    j["adam"] = nn::adam_to_json(nets.value_opt);
    std::ofstream(fs::path(dir) / "nets" / "value.ckpt") << j.dump(2) << "\n";
  }
  for (std::size_t a = 0; a < nets.cost_values.size(); ++a) {
    nlohmann::json j = nn::mlp_to_json(nets.cost_values[a]);
    j["adam"] = nn::adam_to_json(nets.cost_value_opts[a]);
    std::ofstream((fs::path(dir) / "nets" / ("cost_value_" + std::to_string(a) + ".ckpt")))
        << j.dump(2) << "\n";
  }
  std::ofstream(fs::path(dir) / "lagrange.json")
      << nlohmann::json{{"lambda", lag.lambda}, {"step_size", lag.step_size}, {"budget", lag.budget}}
             .dump(2)
      << "\n";
  std::ofstream(fs::path(dir) / "rng.json")
      << nlohmann::json{{"action", action_rng.save_state()},
                        {"minibatch", minibatch_rng.save_state()},
                        {"happo", happo_rng.save_state()},
                        {"step", step},
                        {"episode", episode},
                        {"eval_counter", eval_counter}}
             .dump(2)
      << "\n";
}

inline void load_checkpoint(const std::string& dir, Nets& nets, LagrangeState& lag,
                            Rng& action_rng, Rng& minibatch_rng, Rng& happo_rng, long long& step,
                            long long& episode, long long& eval_counter) {
  namespace fs = std::filesystem;
  auto read_json = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + p.string());
    nlohmann::json j;
    in >> j;
    return j;
  };
  for (std::size_t a = 0; a < nets.policies.size(); ++a) {
    const auto j = read_json(fs::path(dir) / "nets" / ("policy_" + std::to_string(a) + ".ckpt"));
    nets.policies[a] = nn::head_from_json(j);
    nets.policy_opts[a] = nn::adam_from_json(j.at("adam"));
    const auto& ls = j.at("log_std_adam");
    nets.log_std_opts[a].m = ls.at("m").get<std::vector<double>>();
    nets.log_std_opts[a].v = ls.at("v").get<std::vector<double>>();
    nets.log_std_opts[a].lr = ls.at("lr").get<double>();
    nets.log_std_opts[a].step_count = ls.at("step_count").get<long long>();
  }
  {
    const auto j = read_json(fs::path(dir) / "nets" / "value.ckpt");
    nets.value = nn::mlp_from_json(j);
    nets.value_opt = nn::adam_from_json(j.at("adam"));
  }
  for (std::size_t a = 0; a < nets.cost_values.size(); ++a) {
    const auto j = read_json(fs::path(dir) / "nets" / ("cost_value_" + std::to_string(a) + ".ckpt"));
    nets.cost_values[a] = nn::mlp_from_json(j);
    nets.cost_value_opts[a] = nn::adam_from_json(j.at("adam"));
  }
  {
    const auto j = read_json(fs::path(dir) / "lagrange.json");
    lag.lambda = j.at("lambda").get<double>();
    lag.step_size = j.at("step_size").get<double>();
    lag.budget = j.at("budget").get<double>();
  }
  {
    const auto j = read_json(fs::path(dir) / "rng.json");
    action_rng.load_state(j.at("action").get<std::vector<std::uint64_t>>());
    minibatch_rng.load_state(j.at("minibatch").get<std::vector<std::uint64_t>>());
    happo_rng.load_state(j.at("happo").get<std::vector<std::uint64_t>>());
    step = j.at("step").get<long long>();
    episode = j.at("episode").get<long long>();
    eval_counter = j.at("eval_counter").get<long long>();
  }
}

}  // namespace detail

/// The full training loop: per episode sample -> condense -> embed the
/// constraint, roll out E_l-augmented policies, per step describe/encode/
/// flag/predict costs, and every `steps_per_update` run the PPO update and
/// the dual-ascent lambda step. Evaluation runs every `eval_interval` env
/// steps with deterministic policies.
inline TrainSummary train(const TrainSetup& setup) {
  namespace fs = std::filesystem;
  if (setup.corpus == nullptr || setup.encoder == nullptr)
    throw std::invalid_argument("train: corpus and encoder are required");
  const TrainConfig& cfg = setup.config;
  const CostSource source = cost_source(cfg.algorithm);

  Environment env(setup.env);
  const Rng master(setup.seed);
  Rng action_rng = master.derive("action");
  Rng minibatch_rng = master.derive("minibatch");
  Rng happo_rng = master.derive("happo");

  Nets nets = make_nets(env, setup.encoder->dim(), cfg, master, source != CostSource::None);
  LagrangeState lagrange{source == CostSource::None ? 0.0 : cfg.lagrange_init, cfg.lagrange_lr,
                         cfg.budget};
  costlm::ViolationProvider provider(setup.provider);

  long long global_step = 0, episode_idx = 0, eval_counter = 0;
  std::ofstream metrics;
  const bool resuming = !setup.resume_from.empty();
  if (resuming)
    detail::load_checkpoint(setup.resume_from, nets, lagrange, action_rng, minibatch_rng,
                            happo_rng, global_step, episode_idx, eval_counter);
  if (!setup.run_dir.empty()) {
    fs::create_directories(setup.run_dir);
    metrics.open(fs::path(setup.run_dir) / "metrics.jsonl",
                 resuming ? std::ios::app : std::ios::trunc);
  }

  core::LanguageConstraint constraint;
  std::vector<double> episode_costs_completed;  // discounted cost returns, this window
  double ep_cost_acc = 0.0, ep_gamma_pow = 1.0;
  double window_pred_cost_sum = 0.0;
  long long window_pred_cost_n = 0;

  auto begin_episode = [&] {
    const Rng ep_rng = master.derive("episode", static_cast<std::uint64_t>(episode_idx));
    constraint = core::sample_constraint(*setup.corpus, ep_rng.derive("constraint").next_u64());
    costlm::prepare_constraint(constraint, *setup.encoder, setup.provider);
    env.reset(ep_rng.derive("layout").next_u64(), constraint.classes);
    ep_cost_acc = 0.0;
    ep_gamma_pow = 1.0;
    episode_idx += 1;
  };

  TrainSummary summary;
  auto run_eval = [&] {
    const EvalReport report =
        evaluate(setup.env, nets, *setup.corpus, *setup.encoder, setup.provider,
                 cfg.eval_episodes, master.derive("eval", static_cast<std::uint64_t>(eval_counter)));
    eval_counter += 1;
    summary.final_eval_reward = report.reward_mean;
    summary.final_eval_cost = report.cost_mean;
    if (metrics.is_open()) {
      metrics << nlohmann::json{{"type", "eval"},
                                {"step", global_step},
                                {"episode", episode_idx},
                                {"eval_reward_mean", report.reward_mean},
                                {"eval_cost_mean", report.cost_mean},
                                {"violation_step_fraction", report.violation_step_fraction},
                                {"lambda", lagrange.lambda}}
                     .dump()
              << "\n";
    }
  };

  try {
    while (global_step < cfg.total_steps) {
      Rollout rollout;
      rollout.agents.resize(static_cast<std::size_t>(env.n_agents()));

      for (int t = 0; t < cfg.steps_per_update && global_step < cfg.total_steps; ++t) {
        if (!env.active() || env.done()) begin_episode();

        std::vector<std::vector<double>> numeric(static_cast<std::size_t>(env.n_agents()));
        std::vector<double> global_features;
        for (int a = 0; a < env.n_agents(); ++a) {
          numeric[static_cast<std::size_t>(a)] = env.numeric_features(a);
          global_features.insert(global_features.end(), numeric[static_cast<std::size_t>(a)].begin(),
                                 numeric[static_cast<std::size_t>(a)].end());
        }
        global_features.insert(global_features.end(), constraint.embedding.begin(),
                               constraint.embedding.end());

        std::vector<std::vector<double>> actions;
        for (int a = 0; a < env.n_agents(); ++a) {
          auto& ar = rollout.agents[static_cast<std::size_t>(a)];
          auto features =
              detail::concat_features(numeric[static_cast<std::size_t>(a)], constraint.embedding);
          const nn::SampleResult s =
              nn::sample_and_logprob(nets.policies[static_cast<std::size_t>(a)], features,
                                     action_rng);
          ar.features.push_back(std::move(features));
          ar.actions.push_back(s.action);
          ar.logprob.push_back(s.logprob);
          actions.push_back(s.action);
        }
        rollout.value.push_back(critic_value(nets.value, global_features));
        if (source != CostSource::None) {
          for (int a = 0; a < env.n_agents(); ++a) {
            rollout.agents[static_cast<std::size_t>(a)].cost_value.push_back(critic_value(
                nets.cost_values[static_cast<std::size_t>(a)], global_features));
          }
        }

        const core::StepOutcome out = env.step(detail::to_joint(env, actions));

        double step_cost_sum = 0.0;
        for (int a = 0; a < env.n_agents(); ++a) {
          auto& ar = rollout.agents[static_cast<std::size_t>(a)];
          double cost_signal = 0.0;
          std::string description;
          if (source == CostSource::Predicted) {
            const text::EnvDescription d = env.describe(a);
            description = d.text;
            const embed::Embedding e_o = setup.encoder->encode(d.text);
            const costlm::ViolationFlag flag = provider.query_violation(d, constraint);
            cost_signal =
                costlm::predict_cost(embed::Embedding{constraint.embedding}, e_o, flag).value;
          } else if (source == CostSource::GroundTruth) {
            cost_signal = out.cost_truth[static_cast<std::size_t>(a)];
          }
          ar.descriptions.push_back(std::move(description));
          ar.cost_signal.push_back(cost_signal);
          step_cost_sum += cost_signal;
        }
        window_pred_cost_sum += step_cost_sum;
        window_pred_cost_n += env.n_agents();
        ep_cost_acc += ep_gamma_pow * step_cost_sum;
        ep_gamma_pow *= cfg.gamma;

        rollout.global_features.push_back(std::move(global_features));
        rollout.team_reward.push_back(out.team_reward);
        rollout.done.push_back(out.done ? 1.0 : 0.0);
        if (out.done) episode_costs_completed.push_back(ep_cost_acc);

        global_step += 1;
        if (cfg.eval_interval > 0 && global_step % cfg.eval_interval == 0) run_eval();
      }

      if (rollout.size() == 0) break;

      // bootstrap values for the unfinished episode at the window edge
      if (rollout.done.back() < 0.5) {
        std::vector<double> global_features;
        for (int a = 0; a < env.n_agents(); ++a) {
          const auto numeric = env.numeric_features(a);
          global_features.insert(global_features.end(), numeric.begin(), numeric.end());
        }
        global_features.insert(global_features.end(), constraint.embedding.begin(),
                               constraint.embedding.end());
        rollout.bootstrap_value = critic_value(nets.value, global_features);
        if (source != CostSource::None)
          for (int a = 0; a < env.n_agents(); ++a)
            rollout.agents[static_cast<std::size_t>(a)].bootstrap_cost_value = critic_value(
                nets.cost_values[static_cast<std::size_t>(a)], global_features);
      }

      const UpdateStats stats =
          run_update(rollout, nets, cfg, lagrange.lambda, minibatch_rng, happo_rng);

      if (source != CostSource::None && !episode_costs_completed.empty()) {
        double jc = 0.0;
        for (const double c : episode_costs_completed) jc += c;
        jc /= static_cast<double>(episode_costs_completed.size());
        update_lambda(lagrange, jc);
        episode_costs_completed.clear();
      }

      if (metrics.is_open()) {
        metrics << nlohmann::json{
                       {"type", "update"},
                       {"step", global_step},
                       {"episode", episode_idx},
                       {"lambda", lagrange.lambda},
                       {"mean_predicted_cost",
                        window_pred_cost_n > 0
                            ? window_pred_cost_sum / static_cast<double>(window_pred_cost_n)
                            : 0.0},
                       {"loss_policy", stats.policy_loss},
                       {"loss_value", stats.value_loss},
                       {"loss_cost_value", stats.cost_value_loss},
                       {"entropy", stats.entropy}}
                       .dump()
                << "\n";
      }
      window_pred_cost_sum = 0.0;
      window_pred_cost_n = 0;
      if (setup.on_update) setup.on_update(nets);
    }
  } catch (...) {
    // preserve run state for post-mortem resume, then propagate
    if (!setup.run_dir.empty())
      detail::save_checkpoint((fs::path(setup.run_dir) / "ckpt").string(), nets, lagrange,
                              action_rng, minibatch_rng, happo_rng, global_step, episode_idx,
                              eval_counter);
    throw;
  }

  if (cfg.eval_interval <= 0 || global_step % cfg.eval_interval != 0) run_eval();

  if (!setup.run_dir.empty())
    detail::save_checkpoint((fs::path(setup.run_dir) / "ckpt").string(), nets, lagrange,
                            action_rng, minibatch_rng, happo_rng, global_step, episode_idx,
                            eval_counter);
  summary.steps = global_step;
  summary.episodes = episode_idx;
  summary.lambda = lagrange.lambda;
  return summary;
}

}  // namespace lamasafe::marl
