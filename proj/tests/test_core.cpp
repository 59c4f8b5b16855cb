#include <catch2/catch_amalgamated.hpp>

#include "lamasafe/corpus.hpp"
#include "lamasafe/core.hpp"

#include <filesystem>

using namespace lamasafe;

namespace {
std::string data_path(const std::string& rel) {
  return (std::filesystem::path(LAMASAFE_SOURCE_DIR) / rel).string();
}
}  // namespace

TEST_CASE("discounted_return matches hand sums") {
  CHECK(core::discounted_return(std::vector<double>{5.0}, 0.95) == 5.0);
  CHECK(core::discounted_return(std::vector<double>{0.0, 0.0, 0.0}, 0.7) == 0.0);
  // 1 + 0.5 + 0.25
  CHECK(core::discounted_return(std::vector<double>{1.0, 1.0, 1.0}, 0.5) ==
        Catch::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("discounted_return rejects bad input") {
  CHECK_THROWS_AS(core::discounted_return(std::vector<double>{1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(
      core::discounted_return(std::vector<double>{std::numeric_limits<double>::infinity()}, 0.9),
      std::invalid_argument);
  CHECK_THROWS_AS(
      core::discounted_return(std::vector<double>{std::nan("")}, 0.9), std::invalid_argument);
}

TEST_CASE("discounted_return is linear in the rewards") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(20);
    const double gamma = rng.uniform(0.0, 0.999);
    const double a = rng.uniform(-3.0, 3.0);
    std::vector<double> r(n), scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rng.normal();
      scaled[i] = a * r[i];
    }
    CHECK(core::discounted_return(scaled, gamma) ==
          Catch::Approx(a * core::discounted_return(r, gamma)).margin(1e-9));
  }
}

TEST_CASE("discounted_cost_return sums agents before discounting") {
  CHECK(core::discounted_cost_return({{0.0, 0.0}, {0.0, 0.0}}, 0.9) == 0.0);
  // one agent, costs [1,1], gamma 0.9 -> 1 + 0.9
  CHECK(core::discounted_cost_return({{1.0}, {1.0}}, 0.9) == Catch::Approx(1.9).epsilon(1e-12));
  // two agents each cost 1 at t=0 only
  CHECK(core::discounted_cost_return({{1.0, 1.0}}, 0.95) == Catch::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(core::discounted_cost_return({{-0.1}}, 0.9), std::invalid_argument);
}

TEST_CASE("discounted_cost_return nonnegative on nonnegative costs") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> costs(1 + rng.uniform_int(10));
    for (auto& step : costs) {
      step.resize(1 + rng.uniform_int(4));
      for (auto& c : step) c = rng.uniform(0.0, 2.0);
    }
    CHECK(core::discounted_cost_return(costs, rng.uniform(0.0, 0.99)) >= 0.0);
  }
}

TEST_CASE("sample_constraint: determinism and single-entry corpus") {
  text::ConstraintCorpus one;
  one.entries.push_back({"Do not step into the lava.", text::classify_constraint(
                                                           "Do not step into the lava.")});
  CHECK(core::sample_constraint(one, 99).raw == "Do not step into the lava.");

  const auto corpus = text::load_corpus(data_path("corpora/lamasafe_grid.txt"),
                                        text::CorpusSplit::Train);
  const auto a = core::sample_constraint(corpus, 1234);
  const auto b = core::sample_constraint(corpus, 1234);
  CHECK(a.raw == b.raw);
  CHECK_THROWS_AS(core::sample_constraint(text::ConstraintCorpus{}, 1), std::invalid_argument);
}

TEST_CASE("sample_constraint: empirical uniformity") {
  // goal corpus: 86 entries, all texts distinct, so draws can be tallied
  // through the public function alone
  const auto corpus = text::load_corpus(data_path("corpora/lamasafe_goal.txt"),
                                        text::CorpusSplit::Train);
  const std::size_t k = corpus.size();
  REQUIRE(k == 86);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < k; ++i) index.emplace(corpus.entries[i].raw, i);
  REQUIRE(index.size() == k);

  // chi-square critical value for df=85 at p=0.999
  const double critical = 131.042;
  for (const std::uint64_t stream_seed : {501u, 502u}) {
    std::vector<long long> counts(k, 0);
    Rng seeder(stream_seed);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d)
      counts[index.at(core::sample_constraint(corpus, seeder.next_u64()).raw)] += 1;
    const double expected = static_cast<double>(draws) / static_cast<double>(k);
    double chi2 = 0.0;
    for (const long long c : counts) {
      const double diff = static_cast<double>(c) - expected;
      chi2 += diff * diff / expected;
    }
    INFO("stream seed " << stream_seed << " chi2 " << chi2);
    CHECK(chi2 < critical);
  }
}

TEST_CASE("ClassSet set algebra") {
  auto s = core::ClassSet::of({core::HazardClass::Water, core::HazardClass::Collision});
  CHECK(s.contains(core::HazardClass::Water));
  CHECK_FALSE(s.contains(core::HazardClass::Lava));
  CHECK(s.size() == 2);
  CHECK(s.intersects(core::ClassSet::of({core::HazardClass::Collision})));
  CHECK_FALSE(s.intersects(core::ClassSet::of({core::HazardClass::Grass})));
}
