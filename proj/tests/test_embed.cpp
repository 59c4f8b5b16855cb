#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "lamasafe/corpus.hpp"
#include "lamasafe/embed.hpp"

using namespace lamasafe;
using embed::Embedding;
using embed::EncoderState;

namespace {

std::string data_path(const std::string& rel) {
  return (std::filesystem::path(LAMASAFE_SOURCE_DIR) / rel).string();
}

/// Held-out pair separation: mean cos over same-class pairs minus mean cos
/// over disjoint-class pairs.
double separation(const EncoderState& enc, const std::vector<text::CorpusEntry>& entries) {
  double same = 0.0, cross = 0.0;
  long long n_same = 0, n_cross = 0;
  std::vector<Embedding> embs;
  for (const auto& e : entries) embs.push_back(enc.encode_uncached(e.raw));
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      const double c = embs[i].dot(embs[j]);
      if (entries[i].classes.intersects(entries[j].classes)) {
        same += c;
        ++n_same;
      } else {
        cross += c;
        ++n_cross;
      }
    }
  return same / static_cast<double>(n_same) - cross / static_cast<double>(n_cross);
}

}  // namespace

TEST_CASE("encode: unit norm, determinism, bag-of-words order invariance") {
  EncoderState enc;
  const Embedding a = enc.encode("Stay away from the water.");
  CHECK(a.norm() == Catch::Approx(1.0).margin(1e-6));
  const Embedding b = enc.encode("Stay away from the water.");
  CHECK(a.v == b.v);

  const Embedding p1 = enc.encode("water avoid the");
  const Embedding p2 = enc.encode("the water avoid");
  for (std::size_t i = 0; i < p1.v.size(); ++i)
    CHECK(p1.v[i] == Catch::Approx(p2.v[i]).margin(1e-12));

  const Embedding empty = enc.encode("");
  CHECK(empty.v[0] == 1.0);
  CHECK(empty.norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("cosine_sim: identity, orthogonality, clamp, norm check") {
  Embedding v{{1.0, 0.0, 0.0}};
  Embedding w{{0.0, 1.0, 0.0}};
  Embedding neg{{-1.0, 0.0, 0.0}};
  CHECK(embed::cosine_sim(v, v) == 1.0);
  CHECK(embed::cosine_sim(v, w) == 0.0);
  CHECK(embed::cosine_sim(v, neg) == 0.0);  // clamp of -1
  Embedding bad{{0.5, 0.0, 0.0}};
  CHECK_THROWS_AS(embed::cosine_sim(v, bad), std::invalid_argument);

  // cos of -0.4 between unit vectors clamps to 0
  Embedding x{{1.0, 0.0}};
  Embedding y{{-0.4, std::sqrt(1.0 - 0.16)}};
  CHECK(embed::cosine_sim(x, y) == 0.0);
}

TEST_CASE("triplet_loss values from the hinge formula") {
  EncoderState enc(64, 4, 0.5);
  // dist(a,p)=0.2 and dist(a,n)=0.9 means cos(a,p)=0.8, cos(a,n)=0.1
  const Embedding a{{1.0, 0.0, 0.0, 0.0}};
  const Embedding p{{0.8, std::sqrt(1 - 0.64), 0.0, 0.0}};
  const Embedding n{{0.1, 0.0, std::sqrt(1 - 0.01), 0.0}};
  CHECK(enc.triplet_loss(a, p, n) == Catch::Approx(0.0).margin(1e-12));

  // dist(a,p)=0.8, dist(a,n)=0.3, margin 0.5 -> 1.0
  const Embedding p2{{0.2, std::sqrt(1 - 0.04), 0.0, 0.0}};
  const Embedding n2{{0.7, 0.0, std::sqrt(1 - 0.49), 0.0}};
  CHECK(enc.triplet_loss(a, p2, n2) == Catch::Approx(1.0).margin(1e-12));

  // p == n cancels to the margin
  CHECK(enc.triplet_loss(a, p2, p2) == Catch::Approx(0.5).margin(1e-12));
  CHECK(enc.triplet_loss(a, p, n) >= 0.0);
}

TEST_CASE("finetune gradient matches central finite differences") {
  const auto corpus = text::load_corpus(data_path("corpora/lamasafe_grid_finetune.txt"),
                                        text::CorpusSplit::FineTune);
  const auto triplets = text::sample_triplets(corpus, 8, 4242);
  EncoderState enc(128, 8, 0.2, 1.0, 99);

  // keep clear of the hinge kink
  const double at_hinge = [&] {
    double worst = 1.0;
    for (const auto& t : triplets) {
      const auto a = enc.encode_uncached(t.anchor);
      const auto p = enc.encode_uncached(t.positive);
      const auto n = enc.encode_uncached(t.negative);
      worst = std::min(worst, std::abs(0.2 - a.dot(p) + a.dot(n)));
    }
    return worst;
  }();
  REQUIRE(at_hinge > 1e-3);

  const auto analytic = enc.loss_gradient(triplets);
  auto& proj = enc.projection();
  const double h = 1e-6;
  double max_rel = 0.0;
  Rng rng(5);
  for (int probe = 0; probe < 400; ++probe) {
    const std::size_t i = rng.uniform_int(proj.size());
    const double saved = proj[i];
    proj[i] = saved + h;
    enc.bump_version();
    const double up = enc.mean_triplet_loss(triplets);
    proj[i] = saved - h;
    enc.bump_version();
    const double down = enc.mean_triplet_loss(triplets);
    proj[i] = saved;
    enc.bump_version();
    const double fd = (up - down) / (2.0 * h);
    const double rel =
        std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  INFO("max rel error " << max_rel);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("finetune: descent, zero rounds, held-out separation improves") {
  const auto corpus = text::load_corpus(data_path("corpora/lamasafe_grid_finetune.txt"),
                                        text::CorpusSplit::FineTune);
  std::vector<text::CorpusEntry> fine, held;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (i % 2 == 0 ? fine : held).push_back(corpus.entries[i]);
  text::ConstraintCorpus fine_corpus;
  fine_corpus.entries = fine;
  fine_corpus.split = text::CorpusSplit::FineTune;
  const auto triplets = text::sample_triplets(fine_corpus, 30, 31337);

  EncoderState enc;
  const double sep_before = separation(enc, held);
  EncoderState untouched = enc;
  untouched.finetune(triplets, 0);
  CHECK(untouched.projection() == enc.projection());

  enc.finetune(triplets, 95);
  REQUIRE(enc.loss_history().size() == 95);
  CHECK(enc.loss_history().back() <= enc.loss_history().front());
  const double sep_after = separation(enc, held);
  INFO("separation " << sep_before << " -> " << sep_after);
  CHECK(sep_after > sep_before);
}

TEST_CASE("encoder checkpoint round-trip and synonym-table guard") {
  namespace fs = std::filesystem;
  EncoderState enc(256, 16, 0.2, 1.0, 3);
  const auto path = (fs::temp_directory_path() / "lamasafe_encoder_test.ckpt").string();
  enc.save(path);
  const EncoderState back = EncoderState::load(path);
  CHECK(back.projection() == enc.projection());
  CHECK(back.vocab_dim() == 256);
  CHECK(back.dim() == 16);

  auto j = enc.to_json();
  j["synonym_table_hash"] = 12345;
  CHECK_THROWS_AS(EncoderState::from_json(j), std::runtime_error);
  auto j2 = enc.to_json();
  j2["format_version"] = 999;
  CHECK_THROWS_AS(EncoderState::from_json(j2), std::runtime_error);
}
