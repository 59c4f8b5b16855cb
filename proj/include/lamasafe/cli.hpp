#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lamasafe/audit.hpp"
#include "lamasafe/config.hpp"
#include "lamasafe/gradcheck.hpp"
#include "lamasafe/trainer.hpp"

namespace lamasafe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;
inline constexpr int kExitAuditFailure = 3;

/// Sample triplets from the fine-tune corpus, run the fine-tuning rounds,
/// write the encoder checkpoint and a per-round loss history CSV.
inline int run_finetune(const ExperimentConfig& cfg, std::ostream& out = std::cout) {
  const auto corpus = text::load_corpus(cfg.corpus_finetune_path, text::CorpusSplit::FineTune);
  const auto triplets = text::sample_triplets(corpus, cfg.finetune_triplets, cfg.finetune_seed);
  embed::EncoderState encoder(cfg.encoder_vocab_dim, cfg.encoder_dim, cfg.encoder_margin,
                              cfg.encoder_learning_rate, cfg.encoder_init_seed);
  encoder.finetune(triplets, cfg.finetune_rounds);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string ckpt = cfg.encoder_checkpoint.empty()
                               ? (fs::path(cfg.out_dir) / "encoder.ckpt").string()
                               : cfg.encoder_checkpoint;
  if (const auto parent = fs::path(ckpt).parent_path(); !parent.empty())
    fs::create_directories(parent);
  encoder.save(ckpt);

  const std::string csv = (fs::path(cfg.out_dir) / "finetune_loss.csv").string();
  std::ofstream loss_csv(csv);
  loss_csv << "round,loss\n";
  for (std::size_t r = 0; r < encoder.loss_history().size(); ++r) {
    std::ostringstream v;
    v << std::setprecision(17) << encoder.loss_history()[r];
    loss_csv << (r + 1) << "," << v.str() << "\n";
  }
  out << "fine-tuned on " << triplets.size() << " triplets for " << cfg.finetune_rounds
      << " rounds; checkpoint: " << ckpt << "\n";
  return kExitOk;
}

/// Train every seed sequentially; per-seed run directory plus a cross-seed
/// summary CSV of final evaluation reward/cost (mean and std).
inline int run_train(const ExperimentConfig& cfg, std::ostream& out = std::cout) {
  namespace fs = std::filesystem;
  const auto corpus = text::load_corpus(cfg.corpus_train_path, text::CorpusSplit::Train);
  embed::EncoderState encoder = make_encoder(cfg);

  std::vector<marl::TrainSummary> summaries;
  fs::create_directories(cfg.out_dir);
  for (const std::uint64_t seed : cfg.seeds) {
    marl::TrainSetup setup;
    setup.config = cfg.train;
    setup.env = cfg.env;
    setup.seed = seed;
    setup.corpus = &corpus;
    setup.encoder = &encoder;
    setup.provider = cfg.provider;
    setup.run_dir = (fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed))).string();
    setup.resume_from = cfg.resume_from;
    fs::create_directories(setup.run_dir);
    {
      nlohmann::json effective = cfg.raw;
      effective["seeds"] = {seed};
      std::ofstream(fs::path(setup.run_dir) / "config.json") << effective.dump(2) << "\n";
    }
    const marl::TrainSummary s = marl::train(setup);
    summaries.push_back(s);
    out << "seed " << seed << ": steps=" << s.steps << " eval_reward=" << s.final_eval_reward
        << " eval_cost=" << s.final_eval_cost << " lambda=" << s.lambda << "\n";
  }

  auto mean_std = [](auto getter, const std::vector<marl::TrainSummary>& xs) {
    double mean = 0.0;
    for (const auto& x : xs) mean += getter(x);
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (const auto& x : xs) var += (getter(x) - mean) * (getter(x) - mean);
    var /= static_cast<double>(xs.size());
    return std::pair{mean, std::sqrt(var)};
  };
  const auto [rm, rs] = mean_std([](const auto& s) { return s.final_eval_reward; }, summaries);
  const auto [cm, cs] = mean_std([](const auto& s) { return s.final_eval_cost; }, summaries);
  {
    std::ofstream csv(fs::path(cfg.out_dir) / "summary.csv");
    csv << "metric,mean,std\n";
    csv << "final_eval_reward," << rm << "," << rs << "\n";
    csv << "final_eval_cost," << cm << "," << cs << "\n";
  }
  out << "summary over " << summaries.size() << " seeds: reward " << rm << " +/- " << rs
      << ", cost " << cm << " +/- " << cs << "\n";
  return kExitOk;
}

/// Deterministic-policy evaluation of a checkpoint; prints the report and
/// cross-checks the totals against the raw per-episode log.
inline int run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_dir, int episodes,
                    std::ostream& out = std::cout) {
  const auto corpus = text::load_corpus(cfg.corpus_train_path, text::CorpusSplit::Train);
  embed::EncoderState encoder = make_encoder(cfg);

  marl::Environment env(cfg.env);
  const Rng master(cfg.seeds.front());
  marl::Nets nets = marl::make_nets(env, encoder.dim(), cfg.train, master,
                                    marl::cost_source(cfg.train.algorithm) !=
                                        marl::CostSource::None);
  marl::LagrangeState lag;
  Rng a = master.derive("action"), m = master.derive("minibatch"), h = master.derive("happo");
  long long step = 0, episode = 0, evals = 0;
  marl::detail::load_checkpoint(checkpoint_dir, nets, lag, a, m, h, step, episode, evals);

  const marl::EvalReport report = marl::evaluate(cfg.env, nets, corpus, encoder, cfg.provider,
                                                 episodes, master.derive("cli-eval"));
  double reward_total = 0.0, cost_total = 0.0;
  out << "episode,reward,cost\n";
  for (std::size_t i = 0; i < report.episode_rewards.size(); ++i) {
    out << i << "," << report.episode_rewards[i] << "," << report.episode_costs[i] << "\n";
    reward_total += report.episode_rewards[i];
    cost_total += report.episode_costs[i];
  }
  out << "mean_reward=" << report.reward_mean << " mean_cost=" << report.cost_mean
      << " violation_step_fraction=" << report.violation_step_fraction << "\n";
  const double n = static_cast<double>(episodes);
  if (std::abs(reward_total / n - report.reward_mean) > 1e-9 ||
      std::abs(cost_total / n - report.cost_mean) > 1e-9) {
    out << "eval totals do not match the episode log\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

/// Per-class counts and unclassified entries; nonzero exit when any entry
/// fails to classify.
inline int run_corpus_check(const std::string& corpus_path, std::ostream& out = std::cout) {
  const auto corpus = text::load_corpus(corpus_path, text::CorpusSplit::Train);
  std::vector<long long> counts(core::kHazardClassCount, 0);
  std::vector<std::string> unclassified;
  for (const auto& e : corpus.entries) {
    if (e.classes.empty()) unclassified.push_back(e.raw);
    for (const auto c : e.classes.values()) counts[static_cast<std::size_t>(c)] += 1;
  }
  out << "entries: " << corpus.size() << "\n";
  for (int i = 0; i < core::kHazardClassCount; ++i)
    out << hazard_class_name(static_cast<core::HazardClass>(i)) << ": "
        << counts[static_cast<std::size_t>(i)] << "\n";
  out << "unclassified: " << unclassified.size() << "\n";
  for (const auto& u : unclassified) out << "  " << u << "\n";
  return unclassified.empty() ? kExitOk : kExitAuditFailure;
}

/// Exhaustive rule-oracle vs ground-truth agreement on small boards.
inline int run_oracle_audit(const ExperimentConfig& cfg, std::ostream& out = std::cout) {
  const auto corpus = text::load_corpus(cfg.corpus_train_path, text::CorpusSplit::Train);
  std::vector<core::LanguageConstraint> constraints;
  for (const auto& e : corpus.entries) constraints.push_back({.raw = e.raw, .classes = e.classes});
  if (cfg.audit_corrupt_lexicon) constraints = audit::corrupt_classes(std::move(constraints));

  const audit::AgreementReport report = audit::oracle_audit(constraints, cfg.audit_board_size);
  out << "checks: " << report.checks << "\n";
  out << "mismatches: " << report.mismatches << "\n";
  out << "agreement: " << (report.agreement() * 100.0) << "%\n";
  for (const auto& m : report.samples)
    out << "  layout " << m.layout << " agent " << m.agent << " at (" << m.pos_a.x << ","
        << m.pos_a.y << ")/(" << m.pos_b.x << "," << m.pos_b.y << ") flag=" << m.flag
        << " truth_positive=" << m.truth_positive << " constraint=\"" << m.constraint << "\"\n";
  return report.mismatches == 0 ? kExitOk : kExitAuditFailure;
}

/// The finite-difference gradient suite as a command.
inline int run_gradcheck(std::ostream& out = std::cout) {
  const nn::GradCheckResult r = nn::gradcheck(100, 20240601);
  out << "nets: " << r.nets_checked << " params: " << r.params_checked
      << " max_rel_error: " << r.max_rel_error << "\n";
  return r.max_rel_error < 1e-4 ? kExitOk : kExitRuntimeError;
}

}  // namespace lamasafe::cli
