#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lamasafe/core.hpp"
#include "lamasafe/costlm.hpp"
#include "lamasafe/describe.hpp"
#include "lamasafe/embed.hpp"
#include "lamasafe/goal_env.hpp"
#include "lamasafe/grid_env.hpp"
#include "lamasafe/nn.hpp"
#include "lamasafe/rng.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::marl {

using core::JointAction;
using core::StepOutcome;

enum class Algorithm { Mappo, Happo, SmallMappo, SmallHappo, MappoLagrange, HappoLagrange };

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "mappo") return Algorithm::Mappo;
  if (s == "happo") return Algorithm::Happo;
  if (s == "small-mappo") return Algorithm::SmallMappo;
  if (s == "small-happo") return Algorithm::SmallHappo;
  if (s == "mappo-lagrange") return Algorithm::MappoLagrange;
  if (s == "happo-lagrange") return Algorithm::HappoLagrange;
  throw std::invalid_argument("unknown algorithm: " + s);
}

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Mappo: return "mappo";
    case Algorithm::Happo: return "happo";
    case Algorithm::SmallMappo: return "small-mappo";
    case Algorithm::SmallHappo: return "small-happo";
    case Algorithm::MappoLagrange: return "mappo-lagrange";
    case Algorithm::HappoLagrange: return "happo-lagrange";
  }
  return "?";
}

inline bool is_happo_family(Algorithm a) {
  return a == Algorithm::Happo || a == Algorithm::SmallHappo || a == Algorithm::HappoLagrange;
}

/// Where the trainer's cost signal comes from. Only the oracle Lagrange
/// baselines ever see the environment's ground truth.
enum class CostSource { None, Predicted, GroundTruth };

inline CostSource cost_source(Algorithm a) {
  switch (a) {
    case Algorithm::Mappo:
    case Algorithm::Happo: return CostSource::None;
    case Algorithm::SmallMappo:
    case Algorithm::SmallHappo: return CostSource::Predicted;
    case Algorithm::MappoLagrange:
    case Algorithm::HappoLagrange: return CostSource::GroundTruth;
  }
  return CostSource::None;
}

/// Lagrange multiplier state, updated by projected dual ascent.
struct LagrangeState {
  double lambda = 0.78;
  double step_size = 1e-5;
  double budget = 0.0;
};

inline void update_lambda(LagrangeState& state, double episode_cost_return) {
  state.lambda =
      std::max(0.0, state.lambda + state.step_size * (episode_cost_return - state.budget));
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::SmallMappo;
  double gamma = 0.95;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int ppo_epochs = 5;
  int batch_size = 1024;
  int steps_per_update = 100;
  double actor_lr = 9e-5;
  double critic_lr = 3e-4;
  double entropy_coef = 0.01;
  int eval_interval = 1000;
  int eval_episodes = 10;
  double lagrange_init = 0.78;
  double lagrange_lr = 1e-5;
  double budget = 0.0;
  bool normalize_advantages = true;
  double grad_clip_norm = 0.0;  // 0 = off
  int hidden_dim = 64;
  int hidden_layers = 2;
  long long total_steps = 100000;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;  // advantages + values[0..T)
};

/// Recursive generalized advantage estimation. `values` carries T+1 entries
/// (bootstrap last); `dones` cuts both the bootstrap and the recursion.
inline GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                             const std::vector<double>& dones, double gamma, double lam) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1) throw std::invalid_argument("compute_gae: need T+1 values");
  if (dones.size() != T) throw std::invalid_argument("compute_gae: dones length mismatch");
  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.targets.assign(T, 0.0);
  double acc = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double not_done = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * not_done * values[t + 1] - values[t];
    acc = delta + gamma * lam * not_done * acc;
    out.advantages[t] = acc;
    out.targets[t] = acc + values[t];
  }
  return out;
}

/// Eq.-style TD(0) regression losses (targets detached).
inline double value_loss(const std::vector<double>& v_pred, const std::vector<double>& rewards,
                         const std::vector<double>& v_next, double gamma) {
  if (v_pred.size() != rewards.size() || v_next.size() != rewards.size())
    throw std::invalid_argument("value_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < v_pred.size(); ++t) {
    const double e = rewards[t] + gamma * v_next[t] - v_pred[t];
    sum += e * e;
  }
  return sum / static_cast<double>(v_pred.size());
}

inline double cost_value_loss(const std::vector<double>& vc_pred, const std::vector<double>& costs,
                              const std::vector<double>& vc_next, double gamma) {
  if (vc_pred.size() != costs.size() || vc_next.size() != costs.size())
    throw std::invalid_argument("cost_value_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < vc_pred.size(); ++t) {
    const double e = costs[t] + gamma * vc_next[t] - vc_pred[t];
    sum += 0.5 * e * e;
  }
  return sum / static_cast<double>(vc_pred.size());
}

/// -mean(min(rho*A, clip(rho)*A)); the entropy bonus is accounted
/// separately by the update.
inline double ppo_policy_loss(const std::vector<double>& logprob_new,
                              const std::vector<double>& logprob_old,
                              const std::vector<double>& advantage, double clip_eps) {
  if (logprob_new.size() != logprob_old.size() || advantage.size() != logprob_new.size())
    throw std::invalid_argument("ppo_policy_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < logprob_new.size(); ++i) {
    const double rho = std::exp(logprob_new[i] - logprob_old[i]);
    const double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
    sum += std::min(rho * advantage[i], clipped * advantage[i]);
  }
  return -sum / static_cast<double>(logprob_new.size());
}

/// A = A_r - lambda * A_c elementwise. Callers normalize first when
/// configured; lambda == 0 short-circuits to A_r so the unconstrained path
/// is bit-identical to the baselines.
inline std::vector<double> combined_advantage(const std::vector<double>& adv_reward,
                                              const std::vector<double>& adv_cost, double lambda) {
  if (lambda == 0.0) return adv_reward;
  if (adv_reward.size() != adv_cost.size())
    throw std::invalid_argument("combined_advantage: length mismatch");
  std::vector<double> out(adv_reward.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = adv_reward[i] - lambda * adv_cost[i];
  return out;
}

/// In-place mean-0 std-1 normalization (no-op on constant input).
inline void normalize_advantages(std::vector<double>& a) {
  if (a.empty()) return;
  double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  double var = 0.0;
  for (const double x : a) var += (x - mean) * (x - mean);
  var /= static_cast<double>(a.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    for (auto& x : a) x -= mean;
    return;
  }
  for (auto& x : a) x = (x - mean) / sd;
}

// ---------------------------------------------------------------------------
// Environment facade
// ---------------------------------------------------------------------------

enum class EnvKind { Grid, Goal };
enum class GridLayout { Random, OnePath };

struct EnvSpec {
  EnvKind kind = EnvKind::Grid;
  int n_agents = 2;
  GridLayout layout = GridLayout::Random;
  int grid_size = 10;        // board side including walls
  int hazard_count = 20;
  goal::DifficultySpec difficulty;
  int goal_hazard_override = -1;
  int goal_vase_override = -1;
};

/// Uniform surface over the two environments for the trainer and evaluator.
class Environment {
 public:
  explicit Environment(const EnvSpec& spec) : spec_(spec) {
    if (spec_.kind == EnvKind::Goal) {
      difficulty_ = spec_.difficulty;
      if (spec_.goal_hazard_override >= 0) difficulty_.hazard_override = spec_.goal_hazard_override;
      if (spec_.goal_vase_override >= 0) difficulty_.vase_override = spec_.goal_vase_override;
    }
  }

  void reset(std::uint64_t seed, core::ClassSet constraint_classes) {
    if (spec_.kind == EnvKind::Grid) {
      grid_ = (spec_.layout == GridLayout::Random)
                  ? grid::generate_random_layout(spec_.grid_size, spec_.hazard_count,
                                                 spec_.n_agents, seed)
                  : grid::generate_onepath_layout(spec_.n_agents, seed);
      grid_->constraint_classes = constraint_classes;
    } else {
      goal_ = goal::reset(difficulty_, spec_.n_agents, seed);
      goal_->constraint_classes = constraint_classes;
    }
  }

  StepOutcome step(const JointAction& joint) {
    return spec_.kind == EnvKind::Grid ? grid::step(*grid_, joint) : goal::step(*goal_, joint);
  }

  std::vector<double> numeric_features(int agent) const {
    return spec_.kind == EnvKind::Grid ? grid::numeric_features(*grid_, agent)
                                       : goal::numeric_features_goal(*goal_, agent);
  }

  text::EnvDescription describe(int agent) const {
    return spec_.kind == EnvKind::Grid ? text::describe_grid(*grid_, agent)
                                       : text::describe_goal(*goal_, agent);
  }

  bool done() const { return spec_.kind == EnvKind::Grid ? grid_->done : goal_->done; }
  bool active() const { return spec_.kind == EnvKind::Grid ? grid_.has_value() : goal_.has_value(); }
  int n_agents() const { return spec_.n_agents; }
  bool discrete() const { return spec_.kind == EnvKind::Grid; }
  int action_dim() const { return discrete() ? grid::kMoveCount : 2; }
  double action_bound() const { return spec_.kind == EnvKind::Goal ? goal_->v_max : 0.0; }
  int numeric_size() const {
    return spec_.kind == EnvKind::Grid ? grid::numeric_feature_size() : goal::numeric_feature_size();
  }
  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  goal::DifficultySpec difficulty_;
  std::optional<grid::GridWorld> grid_;
  std::optional<goal::GoalWorld> goal_;
};

// ---------------------------------------------------------------------------
// Rollout storage and networks
// ---------------------------------------------------------------------------

struct AgentRollout {
  std::vector<std::vector<double>> features;  // numeric ++ E_l
  std::vector<std::string> descriptions;
  std::vector<std::vector<double>> actions;
  std::vector<double> logprob;
  std::vector<double> cost_signal;  // predicted / truth / zero per algorithm
  std::vector<double> cost_value;
  double bootstrap_cost_value = 0.0;
};

struct Rollout {
  std::vector<AgentRollout> agents;
  std::vector<std::vector<double>> global_features;  // all numeric ++ E_l
  std::vector<double> team_reward;
  std::vector<double> done;
  std::vector<double> value;
  double bootstrap_value = 0.0;

  std::size_t size() const { return team_reward.size(); }
};

struct Nets {
  std::vector<nn::PolicyHead> policies;
  std::vector<nn::AdamState> policy_opts;
  std::vector<nn::VecAdam> log_std_opts;
  nn::Mlp value;
  nn::AdamState value_opt;
  std::vector<nn::Mlp> cost_values;            // per agent; empty when CostSource::None
  std::vector<nn::AdamState> cost_value_opts;
};

inline std::vector<int> hidden_sizes(int input, int output, const TrainConfig& cfg) {
  std::vector<int> sizes = {input};
  for (int i = 0; i < cfg.hidden_layers; ++i) sizes.push_back(cfg.hidden_dim);
  sizes.push_back(output);
  return sizes;
}

/// Networks are initialized from per-name derived streams so that adding or
/// removing one net never shifts another net's initial weights.
inline Nets make_nets(const Environment& env, int embed_dim, const TrainConfig& cfg,
                      const Rng& master, bool with_cost_critics) {
  Nets nets;
  const int obs = env.numeric_size() + embed_dim;
  const int global = env.numeric_size() * env.n_agents() + embed_dim;
  for (int a = 0; a < env.n_agents(); ++a) {
    Rng r = master.derive("net-policy", static_cast<std::uint64_t>(a));
    if (env.discrete()) {
      nets.policies.push_back(
          nn::PolicyHead::categorical(hidden_sizes(obs, env.action_dim(), cfg), r));
    } else {
      nets.policies.push_back(nn::PolicyHead::gaussian(hidden_sizes(obs, env.action_dim(), cfg), r,
                                                       -env.action_bound(), env.action_bound()));
    }
    nets.policy_opts.push_back(nn::AdamState::create(nets.policies.back().net, cfg.actor_lr));
    nets.log_std_opts.push_back(
        nn::VecAdam::create(nets.policies.back().log_std.size(), cfg.actor_lr));
  }
  Rng rv = master.derive("net-value");
  nets.value = nn::Mlp::create(hidden_sizes(global, 1, cfg), rv);
  nets.value_opt = nn::AdamState::create(nets.value, cfg.critic_lr);
  if (with_cost_critics) {
    for (int a = 0; a < env.n_agents(); ++a) {
      Rng rc = master.derive("net-cost-value", static_cast<std::uint64_t>(a));
      nets.cost_values.push_back(nn::Mlp::create(hidden_sizes(global, 1, cfg), rc));
      nets.cost_value_opts.push_back(nn::AdamState::create(nets.cost_values.back(), cfg.critic_lr));
    }
  }
  return nets;
}

inline double critic_value(const nn::Mlp& critic, const std::vector<double>& global_features) {
  return nn::forward(critic, global_features).output[0];
}

// ---------------------------------------------------------------------------
// PPO update
// ---------------------------------------------------------------------------

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double cost_value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio_epoch0 = 1.0;
};

namespace detail {

/// One PPO minibatch step for one agent's policy.
inline void policy_minibatch_step(nn::PolicyHead& head, nn::AdamState& opt, nn::VecAdam& ls_opt,
                                  const AgentRollout& data, const std::vector<double>& advantage,
                                  const std::vector<std::size_t>& batch, const TrainConfig& cfg,
                                  double& loss_acc, double& entropy_acc) {
  nn::Gradients grads = nn::Gradients::zeros_like(head.net);
  std::vector<double> log_std_grad(head.log_std.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0, ent = 0.0;

  for (const std::size_t idx : batch) {
    const nn::Evaluation ev = nn::evaluate_action(head, data.features[idx], data.actions[idx]);
    const double rho = std::exp(ev.logprob - data.logprob[idx]);
    const double a = advantage[idx];
    const double clipped = std::clamp(rho, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double surr1 = rho * a;
    const double surr2 = clipped * a;
    loss += -std::min(surr1, surr2);
    ent += ev.entropy;
    // d(-min)/d(logprob): the unclipped branch contributes rho*a, the
    // clipped branch is locally constant in the parameters
    const double dlp = (surr1 <= surr2) ? rho * a : 0.0;

    std::vector<double> out_grad(ev.tape.output.size(), 0.0);
    if (head.kind == nn::HeadKind::Categorical) {
      const auto act = static_cast<std::size_t>(data.actions[idx][0]);
      for (std::size_t k = 0; k < out_grad.size(); ++k) {
        const double onehot = (k == act) ? 1.0 : 0.0;
        const double dlogp_dlogit = onehot - ev.probs[k];
        const double dent_dlogit = -ev.probs[k] * (std::log(std::max(ev.probs[k], 1e-300)) + ev.entropy);
        out_grad[k] = (-dlp * dlogp_dlogit - cfg.entropy_coef * dent_dlogit) * inv_b;
      }
    } else {
      for (std::size_t k = 0; k < out_grad.size(); ++k) {
        const double sigma = std::exp(head.log_std[k]);
        const double d = (data.actions[idx][k] - ev.tape.output[k]) / sigma;
        out_grad[k] = (-dlp * (d / sigma)) * inv_b;
        // entropy does not depend on the mean
        log_std_grad[k] += (-dlp * (d * d - 1.0) - cfg.entropy_coef * 1.0) * inv_b;
      }
    }
    nn::backward(head.net, ev.tape, out_grad, grads);
  }
  nn::clip_gradients(grads, cfg.grad_clip_norm);
  nn::adam_step(head.net, grads, opt);
  if (head.kind == nn::HeadKind::Gaussian) ls_opt.step(head.log_std, log_std_grad);

  loss_acc += loss * inv_b - cfg.entropy_coef * ent * inv_b;
  entropy_acc += ent * inv_b;
}

/// One TD-regression minibatch step for a critic. `half_quadratic` applies
/// the 1/2 factor of the cost-value loss.
inline double critic_minibatch_step(nn::Mlp& critic, nn::AdamState& opt,
                                    const std::vector<std::vector<double>>& inputs,
                                    const std::vector<double>& targets,
                                    const std::vector<std::size_t>& batch, const TrainConfig& cfg,
                                    bool half_quadratic) {
  nn::Gradients grads = nn::Gradients::zeros_like(critic);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const std::size_t idx : batch) {
    const nn::Tape tape = nn::forward(critic, inputs[idx]);
    const double e = tape.output[0] - targets[idx];
    loss += (half_quadratic ? 0.5 : 1.0) * e * e;
    const double factor = half_quadratic ? 1.0 : 2.0;
    nn::backward(critic, tape, {factor * e * inv_b}, grads);
  }
  nn::clip_gradients(grads, cfg.grad_clip_norm);
  nn::adam_step(critic, grads, opt);
  return loss * inv_b;
}

inline std::vector<std::vector<std::size_t>> epoch_minibatches(std::size_t n, int batch_size,
                                                               Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> out;
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(batch_size), n);
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t end = std::min(n, start + bs);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace detail

/// Full PPO update over one rollout window: GAE, advantage normalization,
/// the lambda-combined advantage, `ppo_epochs` passes of policy and critic
/// minibatches. MAPPO updates agents independently; HAPPO updates them in a
/// random permutation and rescales the remaining agents' advantages by the
/// updated agent's post-update ratio.
inline UpdateStats run_update(const Rollout& rollout, Nets& nets, const TrainConfig& cfg,
                              double lambda, Rng& minibatch_rng, Rng& happo_rng) {
  const std::size_t T = rollout.size();
  if (T == 0) throw std::invalid_argument("run_update: empty rollout");
  const int n_agents = static_cast<int>(rollout.agents.size());
  const bool happo = is_happo_family(cfg.algorithm);
  const bool with_cost = !nets.cost_values.empty();

  // reward advantages, shared across agents (centralized critic)
  std::vector<double> values(rollout.value);
  values.push_back(rollout.bootstrap_value);
  GaeResult reward_gae = compute_gae(rollout.team_reward, values, rollout.done, cfg.gamma,
                                     cfg.gae_lambda);
  if (cfg.normalize_advantages) normalize_advantages(reward_gae.advantages);

  // per-agent combined advantages; a window with no cost signal at all
  // contributes no cost gradient (normalizing the cost advantages there
  // would amplify critic noise to unit scale)
  std::vector<std::vector<double>> combined(static_cast<std::size_t>(n_agents));
  for (int a = 0; a < n_agents; ++a) {
    const auto& ar = rollout.agents[static_cast<std::size_t>(a)];
    const bool any_cost =
        std::any_of(ar.cost_signal.begin(), ar.cost_signal.end(), [](double c) { return c != 0.0; });
    if (with_cost && lambda != 0.0 && any_cost) {
      std::vector<double> cvalues(ar.cost_value);
      cvalues.push_back(ar.bootstrap_cost_value);
      GaeResult cost_gae =
          compute_gae(ar.cost_signal, cvalues, rollout.done, cfg.gamma, cfg.gae_lambda);
      if (cfg.normalize_advantages) normalize_advantages(cost_gae.advantages);
      combined[static_cast<std::size_t>(a)] =
          combined_advantage(reward_gae.advantages, cost_gae.advantages, lambda);
    } else {
      combined[static_cast<std::size_t>(a)] = reward_gae.advantages;
    }
  }

  // frozen TD targets from rollout-time values
  std::vector<double> value_targets(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double next = (t + 1 < T) ? rollout.value[t + 1] : rollout.bootstrap_value;
    value_targets[t] = rollout.team_reward[t] + cfg.gamma * (1.0 - rollout.done[t]) * next;
  }
  std::vector<std::vector<double>> cost_targets(static_cast<std::size_t>(n_agents));
  if (with_cost) {
    for (int a = 0; a < n_agents; ++a) {
      const auto& ar = rollout.agents[static_cast<std::size_t>(a)];
      auto& ct = cost_targets[static_cast<std::size_t>(a)];
      ct.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const double next = (t + 1 < T) ? ar.cost_value[t + 1] : ar.bootstrap_cost_value;
        ct[t] = ar.cost_signal[t] + cfg.gamma * (1.0 - rollout.done[t]) * next;
      }
    }
  }

  // one permutation per epoch, shared by every network in that epoch
  std::vector<std::vector<std::vector<std::size_t>>> epochs;
  for (int e = 0; e < cfg.ppo_epochs; ++e)
    epochs.push_back(detail::epoch_minibatches(T, cfg.batch_size, minibatch_rng));

  UpdateStats stats;
  // log-prob bookkeeping check: before any step, the PPO ratio is exactly 1
  {
    double ratio_sum = 0.0;
    long long n = 0;
    for (int a = 0; a < n_agents; ++a) {
      const auto& data = rollout.agents[static_cast<std::size_t>(a)];
      for (std::size_t t = 0; t < T; ++t) {
        const nn::Evaluation ev =
            nn::evaluate_action(nets.policies[static_cast<std::size_t>(a)], data.features[t],
                                data.actions[t]);
        ratio_sum += std::exp(ev.logprob - data.logprob[t]);
        ++n;
      }
    }
    stats.mean_ratio_epoch0 = ratio_sum / static_cast<double>(n);
  }

  // agent update order
  std::vector<std::size_t> order(static_cast<std::size_t>(n_agents));
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (happo) order = happo_rng.permutation(static_cast<std::size_t>(n_agents));

  std::vector<double> happo_multiplier(T, 1.0);
  int minibatch_count = 0;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t a = order[oi];
    auto& head = nets.policies[a];
    const auto& data = rollout.agents[a];

    std::vector<double> adv = combined[a];
    if (happo)
      for (std::size_t t = 0; t < T; ++t) adv[t] *= happo_multiplier[t];

    for (int e = 0; e < cfg.ppo_epochs; ++e)
      for (const auto& batch : epochs[static_cast<std::size_t>(e)]) {
        detail::policy_minibatch_step(head, nets.policy_opts[a], nets.log_std_opts[a], data, adv,
                                      batch, cfg, stats.policy_loss, stats.entropy);
        ++minibatch_count;
      }

    if (happo && oi + 1 < order.size()) {
      for (std::size_t t = 0; t < T; ++t) {
        const nn::Evaluation ev = nn::evaluate_action(head, data.features[t], data.actions[t]);
        happo_multiplier[t] *= std::exp(ev.logprob - data.logprob[t]);
      }
    }
  }
  if (minibatch_count > 0) {
    stats.policy_loss /= minibatch_count;
    stats.entropy /= minibatch_count;
  }

  int critic_batches = 0;
  for (int e = 0; e < cfg.ppo_epochs; ++e)
    for (const auto& batch : epochs[static_cast<std::size_t>(e)]) {
      stats.value_loss += detail::critic_minibatch_step(nets.value, nets.value_opt,
                                                        rollout.global_features, value_targets,
                                                        batch, cfg, false);
      ++critic_batches;
    }
  if (critic_batches > 0) stats.value_loss /= critic_batches;

  if (with_cost) {
    int cost_batches = 0;
    for (int a = 0; a < n_agents; ++a)
      for (int e = 0; e < cfg.ppo_epochs; ++e)
        for (const auto& batch : epochs[static_cast<std::size_t>(e)]) {
          stats.cost_value_loss += detail::critic_minibatch_step(
              nets.cost_values[static_cast<std::size_t>(a)],
              nets.cost_value_opts[static_cast<std::size_t>(a)], rollout.global_features,
              cost_targets[static_cast<std::size_t>(a)], batch, cfg, true);
          ++cost_batches;
        }
    if (cost_batches > 0) stats.cost_value_loss /= cost_batches;
  }
  return stats;
}

}  // namespace lamasafe::marl
