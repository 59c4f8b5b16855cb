#pragma once

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lamasafe/corpus.hpp"
#include "lamasafe/describe.hpp"
#include "lamasafe/embed.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lamasafe::costlm {

using core::ClassSet;
using core::HazardClass;
using core::LanguageConstraint;
using embed::Embedding;
using text::EnvDescription;

enum class ProviderKind { RuleOracle, Remote };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::RuleOracle;
  std::string endpoint;       // Remote only; also via LAMASAFE_LLM_ENDPOINT
  std::string auth_token;     // also via LAMASAFE_LLM_TOKEN
  double timeout_seconds = 10.0;
  int max_retries = 2;
  int max_in_flight = 4;
  std::string cache_path;     // append-only JSONL, empty = in-memory only
  std::string prompt_template_path;  // empty = built-in copy of the shipped template
};

struct ViolationFlag {
  int value = 0;  // 0 or 1
  ProviderKind provider = ProviderKind::RuleOracle;
  bool cached = false;
};

/// Eq.-style predicted cost: flag times clamped cosine, always in [0,1].
struct PredictedCost {
  double value = 0.0;
  double similarity = 0.0;
  int flag = 0;
};

inline PredictedCost predict_cost(const Embedding& constraint_embedding,
                                  const Embedding& observation_embedding,
                                  const ViolationFlag& flag) {
  PredictedCost out;
  out.similarity = embed::cosine_sim(constraint_embedding, observation_embedding);
  out.flag = flag.value;
  out.value = static_cast<double>(flag.value) * out.similarity;
  return out;
}

/// Render the violation-query prompt. Plain placeholder substitution; the
/// rendering is byte-stable for fixed inputs.
inline std::string render_violation_prompt(const std::string& template_text,
                                           const std::string& human_constraints,
                                           const std::string& observation, int agent) {
  std::string out = template_text;
  auto replace_all = [&](const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("{human_constraints}", human_constraints);
  replace_all("{agent_i_texted_observation}", observation);
  replace_all("{i}", std::to_string(agent));
  return out;
}

inline const std::string& default_violation_prompt_template() {
  static const std::string t =
      "Given the following natural language constraints:\n"
      "\n"
      "{human_constraints}\n"
      "\n"
      "And the current texted observation for Agent {i}:\n"
      "\n"
      "{agent_i_texted_observation}\n"
      "\n"
      "Please answer the following question with a simple \"Yes\" or \"No\":\n"
      "\n"
      "Has Agent {i} violated any of the given natural language constraints based on its "
      "current texted observation?\n";
  return t;
}

/// Parse a reply whose first word decides: yes -> 1, no -> 0, anything else
/// is unparseable.
inline std::optional<int> parse_yes_no(const std::string& reply) {
  std::size_t i = 0;
  while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i]))) ++i;
  std::string word;
  while (i < reply.size() && std::isalpha(static_cast<unsigned char>(reply[i])))
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i++]))));
  if (word == "yes") return 1;
  if (word == "no") return 0;
  return std::nullopt;
}

namespace detail {

/// (constraint, description) cache key.
struct CacheKey {
  std::uint64_t constraint_hash;
  std::uint64_t description_hash;
  bool operator==(const CacheKey&) const = default;
};

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const {
    return static_cast<std::size_t>(k.constraint_hash ^ (k.description_hash * 0x9e3779b97f4a7c15ULL));
  }
};

/// Rule-oracle judgment from the structured mention list: grid hazard
/// classes fire on-tile, Collision fires on the same-tile sentence or an
/// agent radar distance below 1 m, BlueHazard on a hazard radar distance
/// below 1 m.
inline int rule_oracle_flag(const EnvDescription& d, ClassSet classes) {
  for (const auto& m : d.mentioned) {
    switch (m.kind) {
      case text::EntityKind::Lava:
        if (classes.contains(HazardClass::Lava) && m.qualifier == text::Qualifier::OnTile) return 1;
        break;
      case text::EntityKind::Water:
        if (classes.contains(HazardClass::Water) && m.qualifier == text::Qualifier::OnTile) return 1;
        break;
      case text::EntityKind::Grass:
        if (classes.contains(HazardClass::Grass) && m.qualifier == text::Qualifier::OnTile) return 1;
        break;
      case text::EntityKind::Hazard:
        if (classes.contains(HazardClass::BlueHazard) && m.qualifier == text::Qualifier::Distance &&
            m.distance < 1.0)
          return 1;
        break;
      case text::EntityKind::OtherAgent:
        if (classes.contains(HazardClass::Collision) &&
            (m.qualifier == text::Qualifier::SameTile ||
             (m.qualifier == text::Qualifier::Distance && m.distance < 1.0)))
          return 1;
        break;
      case text::EntityKind::Ball:
      case text::EntityKind::Vase:
        break;
    }
  }
  return 0;
}

}  // namespace detail

struct ProviderStats {
  std::uint64_t queries = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t remote_calls = 0;
  std::uint64_t fail_open = 0;
};

/// Violation-flag provider: the deterministic rule oracle, or a remote LLM
/// speaking {"prompt","max_tokens"} -> {"text"}. Responses are cached by
/// (constraint, description) in memory and optionally in an append-only
/// JSONL file.
class ViolationProvider {
 public:
  explicit ViolationProvider(ProviderConfig config) : config_(std::move(config)) {
    if (config_.kind == ProviderKind::Remote) {
      if (config_.endpoint.empty()) {
        if (const char* ep = std::getenv("LAMASAFE_LLM_ENDPOINT")) config_.endpoint = ep;
      }
      if (config_.auth_token.empty()) {
        if (const char* tok = std::getenv("LAMASAFE_LLM_TOKEN")) config_.auth_token = tok;
      }
      if (config_.endpoint.empty())
        throw std::invalid_argument("remote provider requires an endpoint");
      if (config_.timeout_seconds <= 0)
        throw std::invalid_argument("remote provider timeout must be positive");
      prompt_template_ = config_.prompt_template_path.empty()
                             ? default_violation_prompt_template()
                             : read_file(config_.prompt_template_path);
    }
    if (!config_.cache_path.empty()) load_cache_file();
  }

  const ProviderConfig& config() const { return config_; }
  ProviderStats stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
  }

  ViolationFlag query_violation(const EnvDescription& description,
                                const LanguageConstraint& constraint) {
    const detail::CacheKey key{fnv1a64(constraint.raw), fnv1a64(description.text)};
    {
      std::lock_guard lock(mutex_);
      stats_.queries += 1;
      const auto it = cache_.find(key);
      if (it != cache_.end()) {
        stats_.cache_hits += 1;
        return {it->second, config_.kind, true};
      }
    }

    int flag = 0;
    if (config_.kind == ProviderKind::RuleOracle) {
      flag = detail::rule_oracle_flag(description, constraint.classes);
    } else {
      flag = remote_flag(description, constraint);
    }
    {
      std::lock_guard lock(mutex_);
      cache_.emplace(key, flag);
    }
    append_cache_file(key, flag);
    return {flag, config_.kind, false};
  }

 private:
  static std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open prompt template " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void load_cache_file() {
    std::ifstream in(config_.cache_path);
    if (!in) return;  // fresh cache file is fine
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      cache_[{j.at("constraint_hash").get<std::uint64_t>(),
              j.at("description_hash").get<std::uint64_t>()}] = j.at("flag").get<int>();
    }
  }

  void append_cache_file(const detail::CacheKey& key, int flag) {
    if (config_.cache_path.empty()) return;
    std::lock_guard lock(mutex_);
    std::ofstream out(config_.cache_path, std::ios::app);
    out << nlohmann::json{{"constraint_hash", key.constraint_hash},
                          {"description_hash", key.description_hash},
                          {"flag", flag}}
               .dump()
        << "\n";
  }

  int remote_flag(const EnvDescription& description, const LanguageConstraint& constraint) {
    const std::string prompt = render_violation_prompt(prompt_template_, constraint.raw,
                                                       description.text, description.agent);
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      const auto reply = post_prompt(prompt);
      if (!reply) continue;
      const auto parsed = parse_yes_no(*reply);
      if (parsed) {
        {
          std::lock_guard lock(mutex_);
          stats_.remote_calls += 1;
        }
        return *parsed;
      }
    }
    std::cerr << "[lamasafe] warning: remote violation query failed after retries; "
                 "treating as non-violation (flag 0) for agent "
              << description.agent << "\n";
    std::lock_guard lock(mutex_);
    stats_.fail_open += 1;
    return 0;
  }

  std::optional<std::string> post_prompt(const std::string& prompt) {
    // split endpoint into host part and path
    std::string url = config_.endpoint;
    std::string path = "/";
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
      path = url.substr(path_start);
      url = url.substr(0, path_start);
    }
    httplib::Client client(url);
    client.set_connection_timeout(static_cast<int>(config_.timeout_seconds), 0);
    client.set_read_timeout(static_cast<int>(config_.timeout_seconds), 0);
    httplib::Headers headers;
    if (!config_.auth_token.empty())
      headers.emplace("Authorization", "Bearer " + config_.auth_token);
    const nlohmann::json body = {{"prompt", prompt}, {"max_tokens", 8}};
    const auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("text")) return std::nullopt;
    return j.at("text").get<std::string>();
  }

  ProviderConfig config_;
  std::string prompt_template_;
  mutable std::mutex mutex_;
  std::unordered_map<detail::CacheKey, int, detail::CacheKeyHash> cache_;
  ProviderStats stats_;
};

namespace detail {

/// Canonical condensed form: "avoid: <classes>" in enum order.
inline std::string canonical_condensed(ClassSet classes) {
  std::string out = "avoid:";
  bool first = true;
  for (const auto c : classes.values()) {
    out += first ? " " : ", ";
    out += core::hazard_class_name(c);
    first = false;
  }
  return out;
}

}  // namespace detail

/// Condense a raw constraint to its disambiguated essence. The rule backend
/// classifies and emits the canonical "avoid: <classes>" form (unclassifiable
/// text passes through unchanged, with a warning); the remote backend asks
/// the model for a summary and falls back to the rule backend on failure.
inline std::string condense(const std::string& raw, const ProviderConfig& provider) {
  if (raw.empty()) throw std::invalid_argument("condense: empty constraint");
  const ClassSet classes = text::classify_constraint(raw);
  const auto rule_result = [&]() -> std::string {
    if (classes.empty()) {
      std::cerr << "[lamasafe] warning: condense could not classify \"" << raw
                << "\"; keeping raw text\n";
      return raw;
    }
    return detail::canonical_condensed(classes);
  };
  if (provider.kind == ProviderKind::RuleOracle) return rule_result();

  try {
    std::string url = provider.endpoint;
    if (url.empty()) {
      if (const char* ep = std::getenv("LAMASAFE_LLM_ENDPOINT")) url = ep;
    }
    if (url.empty()) throw std::runtime_error("no endpoint configured");
    std::string path = "/";
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
      path = url.substr(path_start);
      url = url.substr(0, path_start);
    }
    httplib::Client client(url);
    client.set_connection_timeout(static_cast<int>(provider.timeout_seconds), 0);
    client.set_read_timeout(static_cast<int>(provider.timeout_seconds), 0);
    httplib::Headers headers;
    std::string tok = provider.auth_token;
    if (tok.empty()) {
      if (const char* t = std::getenv("LAMASAFE_LLM_TOKEN")) tok = t;
    }
    if (!tok.empty()) headers.emplace("Authorization", "Bearer " + tok);
    const std::string prompt =
        "Condense the following constraint into a short list of things to avoid, "
        "formatted as \"avoid: <item1>, <item2>\":\n\n" +
        raw + "\n";
    const nlohmann::json body = {{"prompt", prompt}, {"max_tokens", 32}};
    for (int attempt = 0; attempt <= provider.max_retries; ++attempt) {
      const auto res = client.Post(path, headers, body.dump(), "application/json");
      if (!res || res->status != 200) continue;
      const auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("text")) continue;
      std::string out = j.at("text").get<std::string>();
      while (!out.empty() && std::isspace(static_cast<unsigned char>(out.front())))
        out.erase(out.begin());
      while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
      if (!out.empty()) return out;
    }
  } catch (const std::exception& e) {
    std::cerr << "[lamasafe] warning: remote condensation error: " << e.what() << "\n";
  }
  std::cerr << "[lamasafe] warning: remote condensation failed; falling back to the rule backend\n";
  return rule_result();
}

/// Fill condensed text and embedding on a sampled constraint.
inline void prepare_constraint(LanguageConstraint& c, const embed::EncoderState& encoder,
                               const ProviderConfig& provider) {
  c.condensed = condense(c.raw, provider);
  c.embedding = encoder.encode(c.condensed).v;
}

/// Per-agent cost prediction for one step: encode each description, query
/// the flag, multiply with the clamped similarity.
inline std::vector<PredictedCost> predict_costs_step(
    const std::vector<EnvDescription>& descriptions, const LanguageConstraint& constraint,
    const embed::EncoderState& encoder, ViolationProvider& provider) {
  if (constraint.embedding.empty())
    throw std::invalid_argument("predict_costs_step: constraint not embedded");
  Embedding e_l{constraint.embedding};
  std::vector<PredictedCost> out;
  out.reserve(descriptions.size());
  for (const auto& d : descriptions) {
    const Embedding e_o = encoder.encode(d.text);
    const ViolationFlag flag = provider.query_violation(d, constraint);
    out.push_back(predict_cost(e_l, e_o, flag));
  }
  return out;
}

}  // namespace lamasafe::costlm
