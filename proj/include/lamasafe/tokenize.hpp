#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lamasafe::text {

/// Inflection-folding table shared by the tokenizer and the constraint
/// classifier, so "circles" and "circle" land in the same hash bucket and
/// match the same lexicon entry.
inline const std::unordered_map<std::string, std::string>& synonym_table() {
  static const std::unordered_map<std::string, std::string> table = {
      {"circles", "circle"},   {"circular", "circle"},  {"rounded", "round"},
      {"hazards", "hazard"},   {"hazardous", "hazard"}, {"vases", "vase"},
      {"collisions", "collision"}, {"colliding", "collide"}, {"collided", "collide"},
      {"collides", "collide"}, {"crashing", "crash"},   {"crashes", "crash"},
      {"crashed", "crash"},    {"bumping", "bump"},     {"bumped", "bump"},
      {"bumps", "bump"},       {"hitting", "hit"},      {"hits", "hit"},
      {"avoided", "avoid"},    {"avoids", "avoid"},     {"avoiding", "avoid"},
      {"avoidance", "avoid"},  {"evading", "evade"},    {"evades", "evade"},
      {"ponds", "pond"},       {"lakes", "lake"},       {"mirrors", "mirror"},
      {"stars", "star"},       {"clouds", "cloud"},     {"pools", "pool"},
      {"pooled", "pool"},      {"heavens", "heaven"},   {"tears", "tear"},
      {"oceans", "ocean"},     {"seas", "sea"},         {"raindrops", "raindrop"},
      {"rains", "rain"},       {"meadows", "meadow"},   {"robots", "robot"},
      {"agents", "agent"},     {"walls", "wall"},       {"balls", "ball"},
      {"swimming", "swim"},    {"swims", "swim"},       {"running", "run"},
      {"waters", "water"},     {"grassy", "grass"},
  };
  return table;
}

/// 64-bit FNV-1a of the synonym table contents, stored in encoder
/// checkpoints so a checkpoint is invalidated if the table changes.
inline std::uint64_t synonym_table_hash() {
  // order-independent: xor of per-entry hashes
  std::uint64_t acc = 0;
  for (const auto& [k, v] : synonym_table()) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : k + "->" + v) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    acc ^= h;
  }
  return acc;
}

/// Lowercase, strip punctuation (ASCII non-alphanumerics except '_' split
/// tokens; non-ASCII bytes split too, so typographic quotes and dashes act
/// as separators), then fold inflections through the synonym table.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      const auto it = synonym_table().find(cur);
      out.push_back(it == synonym_table().end() ? cur : it->second);
      cur.clear();
    }
  };
  for (const char raw : s) {
    const auto c = static_cast<unsigned char>(raw);
    if (c < 0x80 && (std::isalnum(c) || c == '_')) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

}  // namespace lamasafe::text
