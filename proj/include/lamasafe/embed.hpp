#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lamasafe/corpus.hpp"
#include "lamasafe/rng.hpp"
#include "lamasafe/tokenize.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::embed {

/// Unit-norm real vector; the currency of similarity computation.
struct Embedding {
  std::vector<double> v;

  double dot(const Embedding& o) const {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * o.v[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Hashed bag-of-words encoder with a trainable linear projection. Frozen
/// after fine-tuning; encode results are cached per (version, text).
class EncoderState {
 public:
  EncoderState(int vocab_dim = 1024, int dim = 64, double margin = 0.2,
               double learning_rate = 1.0, std::uint64_t init_seed = 7)
      : vocab_dim_(vocab_dim), dim_(dim), margin_(margin), learning_rate_(learning_rate) {
    if (vocab_dim <= 0 || dim <= 0) throw std::invalid_argument("EncoderState: bad dimensions");
    if (!(margin > 0.0)) throw std::invalid_argument("EncoderState: margin must be positive");
    Rng rng(init_seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(vocab_dim));
    projection_.resize(static_cast<std::size_t>(dim) * static_cast<std::size_t>(vocab_dim));
    for (auto& w : projection_) w = rng.normal(0.0, scale);
  }

  // copies/moves get a fresh cache; cached embeddings belong to one instance
  EncoderState(const EncoderState& o)
      : vocab_dim_(o.vocab_dim_), dim_(o.dim_), margin_(o.margin_),
        learning_rate_(o.learning_rate_), version_(o.version_), projection_(o.projection_),
        loss_history_(o.loss_history_) {}
  EncoderState& operator=(const EncoderState& o) {
    if (this != &o) {
      vocab_dim_ = o.vocab_dim_;
      dim_ = o.dim_;
      margin_ = o.margin_;
      learning_rate_ = o.learning_rate_;
      version_ = o.version_;
      projection_ = o.projection_;
      loss_history_ = o.loss_history_;
      std::unique_lock lock(cache_->mutex);
      cache_->map.clear();
    }
    return *this;
  }
  EncoderState(EncoderState&& o) noexcept = default;
  EncoderState& operator=(EncoderState&& o) noexcept = default;

  int vocab_dim() const { return vocab_dim_; }
  int dim() const { return dim_; }
  double margin() const { return margin_; }
  double learning_rate() const { return learning_rate_; }
  std::uint64_t version() const { return version_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

  /// Hash bucket counts of the tokenized text (sparse).
  std::vector<std::pair<int, double>> bag_of_words(std::string_view text) const {
    std::unordered_map<int, double> counts;
    for (const auto& t : text::tokenize(text))
      counts[static_cast<int>(fnv1a64(t) % static_cast<std::uint64_t>(vocab_dim_))] += 1.0;
    std::vector<std::pair<int, double>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Project sparse counts and L2-normalize. Empty text (or a zero
  /// projection image) maps to the fixed first basis vector.
  Embedding encode(std::string_view text) const {
    {
      std::shared_lock lock(cache_->mutex);
      const auto it = cache_->map.find(std::string(text));
      if (it != cache_->map.end()) return it->second;
    }
    Embedding e = encode_uncached(text);
    {
      std::unique_lock lock(cache_->mutex);
      cache_->map.emplace(std::string(text), e);
    }
    return e;
  }

  Embedding encode_uncached(std::string_view text) const {
    const auto bow = bag_of_words(text);
    Embedding e;
    e.v.assign(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& [bucket, count] : bow)
      for (int i = 0; i < dim_; ++i)
        e.v[static_cast<std::size_t>(i)] += proj(i, bucket) * count;
    const double n = e.norm();
    if (n < 1e-12) {
      e.v.assign(static_cast<std::size_t>(dim_), 0.0);
      e.v[0] = 1.0;
      return e;
    }
    for (auto& x : e.v) x /= n;
    return e;
  }

  /// One full-batch gradient-descent pass per round, minimizing the mean
  /// hinge loss over the triplets. Analytic gradients through the
  /// normalization and the hinge; throws if the loss goes non-finite.
  void finetune(const std::vector<text::Triplet>& triplets, int rounds) {
    if (triplets.empty()) throw std::invalid_argument("finetune: no triplets");
    loss_history_.clear();
    for (int r = 0; r < rounds; ++r) {
      std::vector<double> grad(projection_.size(), 0.0);
      double loss = 0.0;
      for (const auto& t : triplets) loss += accumulate_triplet(t, grad);
      loss /= static_cast<double>(triplets.size());
      if (!std::isfinite(loss)) throw std::runtime_error("finetune: loss diverged");
      loss_history_.push_back(loss);
      const double scale = learning_rate_ / static_cast<double>(triplets.size());
      for (std::size_t i = 0; i < projection_.size(); ++i) grad[i] *= scale;
      for (std::size_t i = 0; i < projection_.size(); ++i) projection_[i] -= grad[i];
      bump_version();
    }
  }

  /// Mean triplet loss at the current parameters (no update).
  double mean_triplet_loss(const std::vector<text::Triplet>& triplets) const {
    double loss = 0.0;
    for (const auto& t : triplets) {
      const Embedding a = encode_uncached(t.anchor);
      const Embedding p = encode_uncached(t.positive);
      const Embedding n = encode_uncached(t.negative);
      loss += triplet_loss(a, p, n);
    }
    return loss / static_cast<double>(triplets.size());
  }

  /// max(0, margin + dist(a,p) - dist(a,n)) with dist(x,y) = 1 - x.y.
  double triplet_loss(const Embedding& a, const Embedding& p, const Embedding& n) const {
    return std::max(0.0, margin_ - a.dot(p) + a.dot(n));
  }

  /// Full dense gradient of the mean triplet loss wrt the projection, for
  /// the finite-difference oracle in the tests.
  std::vector<double> loss_gradient(const std::vector<text::Triplet>& triplets) const {
    std::vector<double> grad(projection_.size(), 0.0);
    for (const auto& t : triplets) accumulate_triplet(t, grad);
    for (auto& g : grad) g /= static_cast<double>(triplets.size());
    return grad;
  }

  std::vector<double>& projection() { return projection_; }
  const std::vector<double>& projection() const { return projection_; }

  void bump_version() {
    version_ += 1;
    std::unique_lock lock(cache_->mutex);
    cache_->map.clear();
  }

  nlohmann::json to_json() const {
    return {{"format_version", kCheckpointFormatVersion},
            {"vocab_dim", vocab_dim_},
            {"dim", dim_},
            {"margin", margin_},
            {"learning_rate", learning_rate_},
            {"synonym_table_hash", text::synonym_table_hash()},
            {"projection", projection_},
            {"loss_history", loss_history_}};
  }

  static EncoderState from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw std::runtime_error("encoder checkpoint: unsupported format version");
    if (j.at("synonym_table_hash").get<std::uint64_t>() != text::synonym_table_hash())
      throw std::runtime_error("encoder checkpoint: synonym table changed since save");
    EncoderState s(j.at("vocab_dim").get<int>(), j.at("dim").get<int>(),
                   j.at("margin").get<double>(), j.at("learning_rate").get<double>());
    s.projection_ = j.at("projection").get<std::vector<double>>();
    if (s.projection_.size() !=
        static_cast<std::size_t>(s.vocab_dim_) * static_cast<std::size_t>(s.dim_))
      throw std::runtime_error("encoder checkpoint: projection size mismatch");
    s.loss_history_ = j.at("loss_history").get<std::vector<double>>();
    return s;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("encoder save: cannot open " + path);
    out << to_json().dump(2) << "\n";
  }

  static EncoderState load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("encoder load: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

 private:
  double proj(int row, int col) const {
    return projection_[static_cast<std::size_t>(row) * static_cast<std::size_t>(vocab_dim_) +
                       static_cast<std::size_t>(col)];
  }

  struct Projected {
    std::vector<double> z;  // pre-normalization
    Embedding e;
    double norm = 0.0;
    std::vector<std::pair<int, double>> bow;
    bool degenerate = false;  // empty text / zero image: constant, no gradient
  };

  Projected project(std::string_view textv) const {
    Projected out;
    out.bow = bag_of_words(textv);
    out.z.assign(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& [bucket, count] : out.bow)
      for (int i = 0; i < dim_; ++i) out.z[static_cast<std::size_t>(i)] += proj(i, bucket) * count;
    double n2 = 0.0;
    for (const double x : out.z) n2 += x * x;
    out.norm = std::sqrt(n2);
    if (out.norm < 1e-12) {
      out.degenerate = true;
      out.e.v.assign(static_cast<std::size_t>(dim_), 0.0);
      out.e.v[0] = 1.0;
      return out;
    }
    out.e.v = out.z;
    for (auto& x : out.e.v) x /= out.norm;
    return out;
  }

  /// Adds d(hinge)/d(projection) for one triplet into grad; returns the
  /// triplet's loss value.
  double accumulate_triplet(const text::Triplet& t, std::vector<double>& grad) const {
    const Projected a = project(t.anchor);
    const Projected p = project(t.positive);
    const Projected n = project(t.negative);
    const double s = margin_ - a.e.dot(p.e) + a.e.dot(n.e);
    if (s <= 0.0) return 0.0;

    auto backprop = [&](const Projected& x, const std::vector<double>& de) {
      if (x.degenerate) return;
      // dz = (de - e * (e . de)) / norm
      double edotde = 0.0;
      for (int i = 0; i < dim_; ++i) edotde += x.e.v[static_cast<std::size_t>(i)] * de[static_cast<std::size_t>(i)];
      std::vector<double> dz(static_cast<std::size_t>(dim_));
      for (int i = 0; i < dim_; ++i)
        dz[static_cast<std::size_t>(i)] =
            (de[static_cast<std::size_t>(i)] - x.e.v[static_cast<std::size_t>(i)] * edotde) / x.norm;
      for (const auto& [bucket, count] : x.bow)
        for (int i = 0; i < dim_; ++i)
          grad[static_cast<std::size_t>(i) * static_cast<std::size_t>(vocab_dim_) +
               static_cast<std::size_t>(bucket)] += dz[static_cast<std::size_t>(i)] * count;
    };

    std::vector<double> da(static_cast<std::size_t>(dim_)), dp(static_cast<std::size_t>(dim_)),
        dn(static_cast<std::size_t>(dim_));
    for (int i = 0; i < dim_; ++i) {
      da[static_cast<std::size_t>(i)] =
          -p.e.v[static_cast<std::size_t>(i)] + n.e.v[static_cast<std::size_t>(i)];
      dp[static_cast<std::size_t>(i)] = -a.e.v[static_cast<std::size_t>(i)];
      dn[static_cast<std::size_t>(i)] = a.e.v[static_cast<std::size_t>(i)];
    }
    backprop(a, da);
    backprop(p, dp);
    backprop(n, dn);
    return s;
  }

  int vocab_dim_;
  int dim_;
  double margin_;
  double learning_rate_;
  std::uint64_t version_ = 0;
  std::vector<double> projection_;  // dim_ x vocab_dim_, row-major
  std::vector<double> loss_history_;

  struct Cache {
    std::shared_mutex mutex;
    std::unordered_map<std::string, Embedding> map;
  };
  std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

/// Clamped cosine of two unit-norm embeddings, in [0, 1].
inline double cosine_sim(const Embedding& a, const Embedding& b) {
  if (a.v.size() != b.v.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
  if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("cosine_sim: inputs must be unit-norm");
  return std::max(0.0, a.dot(b));
}

}  // namespace lamasafe::embed
