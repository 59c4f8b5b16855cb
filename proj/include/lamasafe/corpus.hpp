#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamasafe/core.hpp"
#include "lamasafe/rng.hpp"
#include "lamasafe/tokenize.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::text {

using core::ClassSet;
using core::HazardClass;
using core::LanguageConstraint;

enum class CorpusSplit { FineTune, Train };

struct CorpusEntry {
  std::string raw;
  ClassSet classes;
};

/// A loaded constraint list. FineTune and Train corpora ship as separate
/// files and must stay disjoint (checked by the tests, not here).
struct ConstraintCorpus {
  std::vector<CorpusEntry> entries;
  CorpusSplit split = CorpusSplit::Train;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;
};

namespace detail {

using TokenPhrase = std::vector<std::string>;

// Clause boundaries inside a sentence. A clause only contributes classes if
// it carries a prohibition marker and no permission marker, so "walk on lava
// and grass, but avoid water" yields Water alone.
inline const std::vector<TokenPhrase>& coordinators() {
  static const std::vector<TokenPhrase> v = {
      {"but"}, {"except"}, {"even", "if"}, {"although"}, {"though"}, {"unless"}, {"yet"}};
  return v;
}

inline const std::vector<TokenPhrase>& prohibition_markers() {
  static const std::vector<TokenPhrase> v = {
      {"avoid"}, {"evade"}, {"not"}, {"cannot"}, {"can", "t"}, {"don", "t"}, {"never"}, {"no"},
      {"off", "limits"}, {"dangerous"}, {"danger"}, {"hazard"}, {"damage"},
      {"stay", "away"}, {"keep", "away"}, {"away", "from"}, {"stay", "out"}, {"keep", "out"},
      {"stay", "off"}, {"keep", "off"}, {"stay", "clear"}, {"steer", "clear"}, {"keep", "clear"},
      {"clear", "of"}, {"free", "of"}, {"beware"}, {"prevent"}, {"prohibited"}, {"banned"},
      {"forbidden"}, {"impassable"}, {"untouched"}, {"bypass"}, {"exclude"}, {"circumvent"},
      {"risk"}, {"injured"}, {"injure"}, {"safe", "distance"}, {"safe", "buffer"},
      {"buffer", "zone"}, {"watch", "out"}, {"distance", "from"}};
  return v;
}

inline const std::vector<TokenPhrase>& permission_markers() {
  static const std::vector<TokenPhrase> v = {
      {"safe"}, {"fine"}, {"okay"}, {"ok"}, {"hurt"}, {"can", "handle"}, {"clear", "on"},
      {"feel", "free"}, {"can", "walk"}, {"can", "cross"}, {"can", "step"}, {"won", "t"}};
  return v;
}

struct ClassKeywords {
  HazardClass cls;
  std::vector<TokenPhrase> phrases;
};

inline const std::vector<ClassKeywords>& class_keywords() {
  static const std::vector<ClassKeywords> v = {
      {HazardClass::Lava, {{"lava"}}},
      {HazardClass::Water,
       {{"water"}, {"swim"}, {"rust"}, {"rain"}, {"raindrop"}, {"pond"}, {"lake"}, {"sea"},
        {"ocean"}, {"sky"}, {"cloud"}, {"heaven"}, {"celestial"}, {"moon"}, {"star"},
        {"mirror"}, {"tear"}, {"pool"}, {"wet"}}},
      {HazardClass::Grass, {{"grass"}, {"meadow"}}},
      {HazardClass::BlueHazard, {{"blue_hazard"}}},
      {HazardClass::Collision,
       {{"collide"}, {"collision"}, {"crash"}, {"bump"}, {"run", "into"}, {"hit"},
        {"other", "agent"}, {"other", "robot"}, {"each", "other"}}}};
  return v;
}

inline int find_phrase(const std::vector<std::string>& tokens, const TokenPhrase& phrase) {
  if (phrase.empty() || tokens.size() < phrase.size()) return -1;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < phrase.size(); ++j) {
      if (tokens[i + j] != phrase[j]) {
        ok = false;
        break;
      }
    }
    if (ok) return static_cast<int>(i);
  }
  return -1;
}

inline bool has_token(const std::vector<std::string>& tokens, std::string_view t) {
  return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
}

/// Sentence split (.!?; and typographic dashes) followed by coordinator
/// splits, tokens already normalized.
inline std::vector<std::vector<std::string>> split_clauses(std::string_view raw) {
  std::vector<std::string> sentences;
  std::string cur;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    bool is_break = (c == '.' || c == '!' || c == '?' || c == ';');
    // U+2013 / U+2014 (en/em dash): 0xE2 0x80 0x93|0x94
    if (!is_break && static_cast<unsigned char>(c) == 0xE2 && i + 2 < raw.size() &&
        static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(raw[i + 2]) == 0x93 ||
         static_cast<unsigned char>(raw[i + 2]) == 0x94)) {
      is_break = true;
      i += 2;
    }
    if (is_break) {
      sentences.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  sentences.push_back(cur);

  std::vector<std::vector<std::string>> clauses;
  for (const auto& s : sentences) {
    auto toks = tokenize(s);
    if (toks.empty()) continue;
    std::vector<std::vector<std::string>> parts = {std::move(toks)};
    for (const auto& coord : coordinators()) {
      std::vector<std::vector<std::string>> next;
      for (auto& p : parts) {
        std::vector<std::string> rest = std::move(p);
        int i = find_phrase(rest, coord);
        while (i >= 0) {
          next.emplace_back(rest.begin(), rest.begin() + i);
          rest.erase(rest.begin(), rest.begin() + i + static_cast<int>(coord.size()));
          i = find_phrase(rest, coord);
        }
        next.push_back(std::move(rest));
      }
      parts = std::move(next);
    }
    for (auto& p : parts)
      if (!p.empty()) clauses.push_back(std::move(p));
  }
  return clauses;
}

inline bool clause_prohibits(const std::vector<std::string>& toks) {
  for (const auto& perm : permission_markers()) {
    const int i = find_phrase(toks, perm);
    if (i >= 0) {
      // "safe distance" / "safe buffer" are prohibitions, not permissions
      if (perm.size() == 1 && perm[0] == "safe" &&
          static_cast<std::size_t>(i) + 1 < toks.size() &&
          (toks[static_cast<std::size_t>(i) + 1] == "distance" ||
           toks[static_cast<std::size_t>(i) + 1] == "buffer"))
        continue;
      return false;
    }
  }
  for (const auto& pro : prohibition_markers())
    if (find_phrase(toks, pro) >= 0) return true;
  return false;
}

}  // namespace detail

/// Keyword/synonym classification of a raw constraint into hazard classes.
/// Clause-scoped so permissions ("lava and grass are safe") don't leak into
/// the class set. Bare "blue" without a circle word is the metaphor family
/// and maps to Water; "blue circle/round" maps to BlueHazard.
inline ClassSet classify_constraint(std::string_view raw) {
  ClassSet out;
  for (const auto& clause : detail::split_clauses(raw)) {
    if (!detail::clause_prohibits(clause)) continue;
    for (const auto& ck : detail::class_keywords()) {
      for (const auto& phrase : ck.phrases) {
        if (detail::find_phrase(clause, phrase) >= 0) {
          out.insert(ck.cls);
          break;
        }
      }
    }
    if (detail::has_token(clause, "blue")) {
      if (detail::has_token(clause, "circle") || detail::has_token(clause, "round"))
        out.insert(HazardClass::BlueHazard);
      else
        out.insert(HazardClass::Water);
    }
  }
  return out;
}

/// Load a constraint corpus: UTF-8, one constraint per line, '#' comments,
/// blank lines skipped; or a JSON array of strings if the first non-space
/// character is '['. Duplicate lines are retained as distinct entries.
inline ConstraintCorpus load_corpus(const std::string& path, CorpusSplit split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  ConstraintCorpus corpus;
  corpus.split = split;

  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '[') {
    const auto arr = nlohmann::json::parse(content);
    for (const auto& item : arr) corpus.entries.push_back({item.get<std::string>(), {}});
  } else {
    std::istringstream lines(content);
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto start = line.find_first_not_of(" \t");
      if (start == std::string::npos) continue;
      if (line[start] == '#') continue;
      const auto end = line.find_last_not_of(" \t");
      corpus.entries.push_back({line.substr(start, end - start + 1), {}});
    }
  }
  if (corpus.entries.empty()) throw std::runtime_error("load_corpus: empty corpus in " + path);

  for (auto& e : corpus.entries) {
    e.classes = classify_constraint(e.raw);
    if (e.classes.empty())
      std::cerr << "[lamasafe] warning: unclassified constraint: \"" << e.raw << "\"\n";
  }
  return corpus;
}

/// Sample 'count' triplets: anchor/positive share at least one class, the
/// negative shares none with the anchor. Deterministic in the seed.
inline std::vector<Triplet> sample_triplets(const ConstraintCorpus& corpus, int count,
                                            std::uint64_t rng_seed) {
  if (count <= 0) throw std::invalid_argument("sample_triplets: count must be positive");
  const auto& es = corpus.entries;

  std::vector<std::size_t> eligible_anchors;
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (es[i].classes.empty()) continue;
    bool has_pos = false, has_neg = false;
    for (std::size_t j = 0; j < es.size(); ++j) {
      if (j == i) continue;
      if (es[j].classes.intersects(es[i].classes)) has_pos = true;
      if (!es[j].classes.empty() && !es[j].classes.intersects(es[i].classes)) has_neg = true;
    }
    if (has_pos && has_neg) eligible_anchors.push_back(i);
  }
  if (eligible_anchors.empty())
    throw std::runtime_error("sample_triplets: corpus cannot furnish a valid triplet");

  Rng rng(rng_seed);
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const std::size_t a = eligible_anchors[rng.uniform_int(eligible_anchors.size())];
    std::vector<std::size_t> pos, neg;
    for (std::size_t j = 0; j < es.size(); ++j) {
      if (j == a) continue;
      if (es[j].classes.intersects(es[a].classes))
        pos.push_back(j);
      else if (!es[j].classes.empty())
        neg.push_back(j);
    }
    const std::size_t p = pos[rng.uniform_int(pos.size())];
    const std::size_t n = neg[rng.uniform_int(neg.size())];
    out.push_back({es[a].raw, es[p].raw, es[n].raw});
  }
  return out;
}

}  // namespace lamasafe::text

namespace lamasafe::core {

/// Uniformly sample one constraint from the corpus; condensation/embedding
/// are filled later by the cost-learning pipeline. Deterministic in the seed.
inline LanguageConstraint sample_constraint(const text::ConstraintCorpus& corpus,
                                            std::uint64_t rng_seed) {
  if (corpus.empty()) throw std::invalid_argument("sample_constraint: empty corpus");
  Rng rng(rng_seed);
  const auto& entry = corpus.entries[rng.uniform_int(corpus.entries.size())];
  LanguageConstraint c;
  c.raw = entry.raw;
  c.classes = entry.classes;
  return c;
}

}  // namespace lamasafe::core
