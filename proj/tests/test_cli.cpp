#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lamasafe/audit.hpp"
#include "lamasafe/cli.hpp"

using namespace lamasafe;

namespace {

std::string data_path(const std::string& rel) {
  return (std::filesystem::path(LAMASAFE_SOURCE_DIR) / rel).string();
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

nlohmann::json tiny_grid_config(const std::filesystem::path& out) {
  return {
      {"environment", {{"kind", "grid"}, {"layout", "random"}, {"size", 6}, {"hazards", 6}}},
      {"n_agents", 2},
      {"algorithm", "small-mappo"},
      {"train",
       {{"total_steps", 600}, {"eval_interval", 300}, {"eval_episodes", 2},
        {"steps_per_update", 100}}},
      {"corpus",
       {{"train", data_path("corpora/lamasafe_grid.txt")},
        {"finetune", data_path("corpora/lamasafe_grid_finetune.txt")}}},
      {"provider", {{"kind", "rule"}}},
      {"encoder", {{"checkpoint", ""}}},
      {"seeds", {5}},
      {"out_dir", out.string()}};
}

}  // namespace

TEST_CASE("config: comments, overrides, validation errors") {
  const auto dir = temp_dir("lamasafe_cli_config");
  const auto path = dir / "config.json";
  {
    std::ofstream f(path);
    f << "{\n  // comment survives parsing\n  \"algorithm\": \"mappo\",\n  \"seeds\": [7]\n}\n";
  }
  const auto cfg = cli::load_config(path.string());
  CHECK(cfg.train.algorithm == marl::Algorithm::Mappo);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7});
  // Table-2 defaults when unspecified
  CHECK(cfg.train.gamma == 0.95);
  CHECK(cfg.train.batch_size == 1024);
  CHECK(cfg.train.steps_per_update == 100);
  CHECK(cfg.train.actor_lr == 9e-5);
  CHECK(cfg.train.critic_lr == 3e-4);
  CHECK(cfg.train.ppo_epochs == 5);
  CHECK(cfg.train.eval_interval == 1000);
  CHECK(cfg.train.eval_episodes == 10);
  CHECK(cfg.train.lagrange_init == 0.78);
  CHECK(cfg.train.lagrange_lr == 1e-5);
  CHECK(cfg.train.hidden_dim == 64);

  const auto overridden =
      cli::load_config(path.string(), {"train.gamma=0.9", "environment.kind=goal",
                                       "out_dir=somewhere"});
  CHECK(overridden.train.gamma == 0.9);
  CHECK(overridden.env.kind == marl::EnvKind::Goal);
  CHECK(overridden.out_dir == "somewhere");

  CHECK_THROWS_AS(cli::load_config(path.string(), {"algorithm=nonsense"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(cli::load_config(path.string(), {"train.gamma=1.5"}), std::invalid_argument);
  CHECK_THROWS_AS(cli::load_config((dir / "missing.json").string()), std::runtime_error);
}

TEST_CASE("corpus-check: published corpora clean, nonsense reported") {
  std::ostringstream out;
  CHECK(cli::run_corpus_check(data_path("corpora/lamasafe_grid.txt"), out) == cli::kExitOk);
  CHECK(out.str().find("unclassified: 0") != std::string::npos);
  CHECK(out.str().find("entries: 83") != std::string::npos);

  const auto dir = temp_dir("lamasafe_cli_corpus");
  {
    std::ofstream f(dir / "bad.txt");
    f << "Never touch the water.\ncompletely unrelated sentence\n";
  }
  std::ostringstream out2;
  CHECK(cli::run_corpus_check((dir / "bad.txt").string(), out2) == cli::kExitAuditFailure);
  CHECK(out2.str().find("completely unrelated sentence") != std::string::npos);

  // multi-class entries make class counts exceed the entry count
  std::ostringstream out3;
  CHECK(cli::run_corpus_check(data_path("corpora/lamasafe_goal.txt"), out3) == cli::kExitOk);
  CHECK(out3.str().find("collision: 86") != std::string::npos);
  CHECK(out3.str().find("blue_hazard: 50") != std::string::npos);
}

TEST_CASE("oracle-audit: clean lexicon passes, corrupted lexicon fails") {
  const auto dir = temp_dir("lamasafe_cli_audit");
  auto j = tiny_grid_config(dir);
  j["audit"] = {{"board_size", 5}};
  const auto cfg = cli::parse_config(j);
  std::ostringstream out;
  CHECK(cli::run_oracle_audit(cfg, out) == cli::kExitOk);
  CHECK(out.str().find("mismatches: 0") != std::string::npos);

  auto j2 = tiny_grid_config(dir);
  j2["audit"] = {{"board_size", 5}, {"corrupt_lexicon", true}};
  std::ostringstream out2;
  CHECK(cli::run_oracle_audit(cli::parse_config(j2), out2) == cli::kExitAuditFailure);

  // empty constraint set: empty report, success
  const auto empty_report = audit::oracle_audit({}, 5);
  CHECK(empty_report.checks == 0);
  CHECK(empty_report.mismatches == 0);
}

TEST_CASE("gradcheck command") {
  std::ostringstream out;
  CHECK(cli::run_gradcheck(out) == cli::kExitOk);
}

TEST_CASE("finetune: loss rows, rounds=0 identity, byte-identical rerun") {
  const auto dir = temp_dir("lamasafe_cli_finetune");
  auto j = tiny_grid_config(dir);
  j["encoder"] = {{"checkpoint", (dir / "encoder.ckpt").string()}, {"rounds", 95},
                  {"triplets", 30}};
  const auto cfg = cli::parse_config(j);
  std::ostringstream out;
  REQUIRE(cli::run_finetune(cfg, out) == cli::kExitOk);

  std::ifstream csv(dir / "finetune_loss.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 95);

  auto read_bytes = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const std::string first = read_bytes(dir / "encoder.ckpt");
  REQUIRE(cli::run_finetune(cfg, out) == cli::kExitOk);
  CHECK(read_bytes(dir / "encoder.ckpt") == first);

  // rounds=0 leaves the encoder at its fresh initialization
  auto j0 = tiny_grid_config(dir);
  j0["encoder"] = {{"checkpoint", (dir / "encoder0.ckpt").string()}, {"rounds", 0}};
  REQUIRE(cli::run_finetune(cli::parse_config(j0), out) == cli::kExitOk);
  const auto fresh = embed::EncoderState(1024, 64, 0.2, 1.0, 7);
  const auto loaded = embed::EncoderState::load((dir / "encoder0.ckpt").string());
  CHECK(loaded.projection() == fresh.projection());
}

TEST_CASE("train: run directory layout, summary, eval cross-check") {
  const auto dir = temp_dir("lamasafe_cli_train");
  const auto cfg = cli::parse_config(tiny_grid_config(dir));
  std::ostringstream out;
  REQUIRE(cli::run_train(cfg, out) == cli::kExitOk);

  namespace fs = std::filesystem;
  const auto run = dir / "seed_5";
  CHECK(fs::exists(run / "config.json"));
  CHECK(fs::exists(run / "metrics.jsonl"));
  CHECK(fs::exists(run / "ckpt" / "lagrange.json"));
  CHECK(fs::exists(run / "ckpt" / "rng.json"));
  CHECK(fs::exists(run / "ckpt" / "nets" / "policy_0.ckpt"));
  CHECK(fs::exists(run / "ckpt" / "nets" / "policy_1.ckpt"));
  CHECK(fs::exists(run / "ckpt" / "nets" / "value.ckpt"));
  CHECK(fs::exists(run / "ckpt" / "nets" / "cost_value_0.ckpt"));
  CHECK(fs::exists(dir / "summary.csv"));

  // metrics parse as JSONL with the contract fields
  std::ifstream metrics(run / "metrics.jsonl");
  std::string line;
  int evals = 0, updates = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "eval") {
      ++evals;
      CHECK(j.contains("eval_reward_mean"));
      CHECK(j.contains("eval_cost_mean"));
      CHECK(j.contains("lambda"));
    } else {
      ++updates;
      CHECK(j.contains("loss_policy"));
      CHECK(j.contains("mean_predicted_cost"));
    }
    CHECK(j.contains("step"));
    CHECK(j.contains("episode"));
  }
  CHECK(evals == 2);   // 600 steps / eval_interval 300
  CHECK(updates == 6); // 600 steps / steps_per_update 100

  std::ostringstream eval_out;
  CHECK(cli::run_eval(cfg, (run / "ckpt").string(), 4, eval_out) == cli::kExitOk);
  CHECK(eval_out.str().find("mean_reward=") != std::string::npos);

  // invalid algorithm rejected before any rollout
  auto bad = tiny_grid_config(dir);
  bad["algorithm"] = "not-an-algorithm";
  CHECK_THROWS_AS(cli::parse_config(bad), std::invalid_argument);
}

TEST_CASE("train: resume continues step count monotonically") {
  const auto dir = temp_dir("lamasafe_cli_resume");
  auto j = tiny_grid_config(dir);
  j["train"]["total_steps"] = 300;
  REQUIRE(cli::run_train(cli::parse_config(j), std::cout) == cli::kExitOk);

  auto j2 = tiny_grid_config(dir);
  j2["train"]["total_steps"] = 600;
  j2["resume_from"] = (dir / "seed_5" / "ckpt").string();
  REQUIRE(cli::run_train(cli::parse_config(j2), std::cout) == cli::kExitOk);

  std::ifstream metrics(dir / "seed_5" / "metrics.jsonl");
  std::string line;
  long long prev_step = -1;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto j3 = nlohmann::json::parse(line);
    const long long step = j3.at("step").get<long long>();
    CHECK(step >= prev_step);
    prev_step = step;
    ++lines;
  }
  CHECK(prev_step == 600);
  CHECK(lines > 4);
}
