#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <regex>

#include "lamasafe/corpus.hpp"
#include "lamasafe/describe.hpp"
#include "lamasafe/goal_env.hpp"
#include "lamasafe/grid_env.hpp"

using namespace lamasafe;
using core::HazardClass;

namespace {

std::string data_path(const std::string& rel) {
  return (std::filesystem::path(LAMASAFE_SOURCE_DIR) / rel).string();
}

}  // namespace

TEST_CASE("describe_grid emits the template for the agent's situation") {
  grid::GridWorld w = grid::detail::blank_world(7, 7, 2);
  w.ball_collected = {true, true};
  w.at(3, 3).kind = grid::TileKind::Lava;
  w.at(5, 5).kind = grid::TileKind::Water;
  w.at(1, 2) = grid::Tile{grid::TileKind::Ball, 0};

  w.agents = {{3, 3}, {1, 1}};
  CHECK(text::describe_grid(w, 0).text == "Agent is on a lava tile. Hazard detected!");

  w.agents = {{3, 2}, {1, 1}};  // adjacent to the lava
  CHECK(text::describe_grid(w, 0).text == "Agent is adjacent to a lava tile. Hazard nearby!");

  w.agents = {{1, 1}, {5, 1}};  // adjacent to the ball at (1,2)
  CHECK(text::describe_grid(w, 0).text == "Agent is adjacent to a reward ball. Collect the ball!");

  w.agents = {{5, 2}, {1, 1}};
  CHECK(text::describe_grid(w, 0).text == "Agent is on a safe tile. No hazards detected.");

  // hazard template wins over the adjacent ball
  grid::GridWorld both = grid::detail::blank_world(7, 7, 1);
  both.ball_collected = {true};
  both.at(2, 1).kind = grid::TileKind::Water;
  both.at(1, 2) = grid::Tile{grid::TileKind::Ball, 0};
  both.agents = {{1, 1}};
  CHECK(text::describe_grid(both, 0).text ==
        "Agent is adjacent to a water tile. Hazard nearby!");

  // same-cell agents append the collision sentence
  w.agents = {{5, 2}, {5, 2}};
  const auto d = text::describe_grid(w, 0);
  CHECK(d.text ==
        "Agent is on a safe tile. No hazards detected. "
        "Agent is on the same tile as another agent. Collision detected!");
  bool has_same_tile = false;
  for (const auto& m : d.mentioned)
    has_same_tile |= (m.kind == text::EntityKind::OtherAgent &&
                      m.qualifier == text::Qualifier::SameTile);
  CHECK(has_same_tile);
}

TEST_CASE("describe_grid stays within the template whitelist over random states") {
  const std::regex whitelist(
      "^(Agent is on a (lava|water|grass) tile\\. Hazard detected!"
      "|Agent is adjacent to a (lava|water|grass) tile\\. Hazard nearby!"
      "|Agent is adjacent to a reward ball\\. Collect the ball!"
      "|Agent is on a safe tile\\. No hazards detected\\.)"
      "( Agent is on the same tile as another agent\\. Collision detected!)?$");
  Rng rng(7);
  int collision_free = 0;
  for (int trial = 0; trial < 500; ++trial) {
    grid::GridWorld w = grid::generate_random_layout(8, 12, 2, rng.next_u64());
    for (int i = 0; i < 10; ++i) {
      w.agents[0] = {1 + static_cast<int>(rng.uniform_int(6)),
                     1 + static_cast<int>(rng.uniform_int(6))};
      w.agents[1] = {1 + static_cast<int>(rng.uniform_int(6)),
                     1 + static_cast<int>(rng.uniform_int(6))};
      for (int a = 0; a < 2; ++a) {
        const auto d = text::describe_grid(w, a);
        CHECK(std::regex_match(d.text, whitelist));
        if (!(w.agents[0] == w.agents[1])) {
          ++collision_free;
          CHECK(d.text.find("Collision") == std::string::npos);
        }
      }
    }
  }
  CHECK(collision_free > 5000);
}

TEST_CASE("describe_goal composes radar sentences with 0.1 m rounding") {
  goal::GoalWorld w = goal::reset({goal::Difficulty::Easy}, 2, 5);
  w.hazards = {{{1.0, 0.0}, 0.3}, {{0.0, 2.5}, 0.3}, {{-3.0, 0.0}, 0.3}};
  w.vases.clear();
  w.agents = {{0.0, 0.0}, {1.9, 1.9}};
  const auto d = text::describe_goal(w, 0);
  CHECK(d.text.rfind("Hazards have been detected within 1m, 2.5m and 3m of you.", 0) == 0);

  // empty radar
  goal::GoalWorld empty = w;
  empty.hazards.clear();
  const auto de = text::describe_goal(empty, 0, 0.5);
  CHECK(de.text == "There is nothing around you.");

  // one vase: exactly one distance mentioned
  goal::GoalWorld one = w;
  one.hazards.clear();
  one.vases = {{{0.8, 0.0}, 0.15}};
  const auto dv = text::describe_goal(one, 0, 2.0);
  CHECK(dv.text == "Vases have been detected within 0.8m of you.");

  // distances in the text equal radar output rounded to 0.1
  const auto radar = goal::radar_distances(w, 0);
  const auto mentioned = text::describe_goal(w, 0).mentioned;
  REQUIRE(mentioned.size() >= 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(mentioned[i].distance ==
          Catch::Approx(std::round(radar.hazards[i] * 10.0) / 10.0).margin(1e-12));
}

TEST_CASE("classify_constraint on the published corpora and spec examples") {
  CHECK(text::classify_constraint("The agents must not dance in the water lest they rust.") ==
        core::ClassSet::of({HazardClass::Water}));
  CHECK(text::classify_constraint("Robots must steer clear of any blue circles in the area.") ==
        core::ClassSet::of({HazardClass::BlueHazard}));
  CHECK(text::classify_constraint("").empty());

  const auto grid_corpus =
      text::load_corpus(data_path("corpora/lamasafe_grid.txt"), text::CorpusSplit::Train);
  REQUIRE(grid_corpus.size() == 83);
  for (const auto& e : grid_corpus.entries)
    CHECK(e.classes == core::ClassSet::of({HazardClass::Water, HazardClass::Collision}));

  const auto goal_corpus =
      text::load_corpus(data_path("corpora/lamasafe_goal.txt"), text::CorpusSplit::Train);
  REQUIRE(goal_corpus.size() == 86);
  int blue = 0, water = 0;
  for (const auto& e : goal_corpus.entries) {
    REQUIRE_FALSE(e.classes.empty());
    CHECK(e.classes.contains(HazardClass::Collision));
    blue += e.classes.contains(HazardClass::BlueHazard) ? 1 : 0;
    water += e.classes.contains(HazardClass::Water) ? 1 : 0;
  }
  CHECK(blue == 50);
  CHECK(water == 36);
}

TEST_CASE("load_corpus: formats, errors, duplicates") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "lamasafe_corpus_test";
  fs::create_directories(dir);

  {
    std::ofstream f(dir / "empty.txt");
    f << "# only a comment\n\n";
  }
  CHECK_THROWS_AS(text::load_corpus((dir / "empty.txt").string(), text::CorpusSplit::Train),
                  std::runtime_error);
  CHECK_THROWS_AS(text::load_corpus((dir / "missing.txt").string(), text::CorpusSplit::Train),
                  std::runtime_error);

  {
    std::ofstream f(dir / "dup.txt");
    f << "Avoid the lava.\nAvoid the lava.\n";
  }
  CHECK(text::load_corpus((dir / "dup.txt").string(), text::CorpusSplit::Train).size() == 2);

  {
    std::ofstream f(dir / "arr.json");
    f << R"(["Avoid the lava.", "Never touch the water."])";
  }
  const auto arr = text::load_corpus((dir / "arr.json").string(), text::CorpusSplit::Train);
  REQUIRE(arr.size() == 2);
  CHECK(arr.entries[1].classes == core::ClassSet::of({HazardClass::Water}));
}

TEST_CASE("fine-tune and train corpora are disjoint") {
  for (const auto& [ft, tr] :
       {std::pair{std::string("corpora/lamasafe_grid_finetune.txt"),
                  std::string("corpora/lamasafe_grid.txt")},
        std::pair{std::string("corpora/lamasafe_goal_finetune.txt"),
                  std::string("corpora/lamasafe_goal.txt")}}) {
    const auto fine = text::load_corpus(data_path(ft), text::CorpusSplit::FineTune);
    const auto train = text::load_corpus(data_path(tr), text::CorpusSplit::Train);
    for (const auto& fe : fine.entries)
      for (const auto& te : train.entries) CHECK(fe.raw != te.raw);
  }
}

TEST_CASE("sample_triplets: count, invariants, determinism, errors") {
  const auto corpus = text::load_corpus(data_path("corpora/lamasafe_grid_finetune.txt"),
                                        text::CorpusSplit::FineTune);
  const auto triplets = text::sample_triplets(corpus, 30, 777);
  REQUIRE(triplets.size() == 30);
  for (const auto& t : triplets) {
    const auto a = text::classify_constraint(t.anchor);
    const auto p = text::classify_constraint(t.positive);
    const auto n = text::classify_constraint(t.negative);
    CHECK(a.intersects(p));
    CHECK_FALSE(a.intersects(n));
  }
  const auto again = text::sample_triplets(corpus, 30, 777);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(triplets[i].anchor == again[i].anchor);
    CHECK(triplets[i].positive == again[i].positive);
    CHECK(triplets[i].negative == again[i].negative);
  }

  text::ConstraintCorpus single;
  single.entries = {{"Avoid the lava.", core::ClassSet::of({HazardClass::Lava})},
                    {"Never touch the lava.", core::ClassSet::of({HazardClass::Lava})}};
  CHECK_THROWS_AS(text::sample_triplets(single, 5, 1), std::runtime_error);
}

TEST_CASE("tokenize: pipeline example, empty text, idempotence") {
  CHECK(text::tokenize("Avoid Blue Circles!") ==
        std::vector<std::string>{"avoid", "blue", "circle"});
  CHECK(text::tokenize("").empty());

  Rng rng(3);
  const auto corpus =
      text::load_corpus(data_path("corpora/lamasafe_goal.txt"), text::CorpusSplit::Train);
  for (int i = 0; i < 40; ++i) {
    const auto& raw = corpus.entries[rng.uniform_int(corpus.size())].raw;
    const auto once = text::tokenize(raw);
    CHECK(text::tokenize(text::join_tokens(once)) == once);
  }
  // the synonym table maps onto fixed points
  for (const auto& [k, v] : text::synonym_table()) {
    const auto it = text::synonym_table().find(v);
    if (it != text::synonym_table().end()) CHECK(it->second == v);
  }
}
