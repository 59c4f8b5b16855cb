#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lamasafe::core {

/// Hazard families a natural-language constraint can name. Collision is the
/// inter-agent rule; the rest are entity kinds.
enum class HazardClass : std::uint8_t { Lava = 0, Water, Grass, BlueHazard, Collision };

inline constexpr int kHazardClassCount = 5;

inline const char* hazard_class_name(HazardClass c) {
  switch (c) {
    case HazardClass::Lava: return "lava";
    case HazardClass::Water: return "water";
    case HazardClass::Grass: return "grass";
    case HazardClass::BlueHazard: return "blue_hazard";
    case HazardClass::Collision: return "collision";
  }
  return "?";
}

/// Small fixed-universe set of HazardClass values.
struct ClassSet {
  std::uint8_t bits = 0;

  static ClassSet of(std::initializer_list<HazardClass> cs) {
    ClassSet s;
    for (auto c : cs) s.insert(c);
    return s;
  }
  void insert(HazardClass c) { bits |= static_cast<std::uint8_t>(1u << static_cast<int>(c)); }
  bool contains(HazardClass c) const {
    return (bits & (1u << static_cast<int>(c))) != 0;
  }
  bool empty() const { return bits == 0; }
  bool intersects(ClassSet other) const { return (bits & other.bits) != 0; }
  int size() const {
    int n = 0;
    for (int i = 0; i < kHazardClassCount; ++i)
      if (bits & (1u << i)) ++n;
    return n;
  }
  std::vector<HazardClass> values() const {
    std::vector<HazardClass> v;
    for (int i = 0; i < kHazardClassCount; ++i)
      if (bits & (1u << i)) v.push_back(static_cast<HazardClass>(i));
    return v;
  }
  friend bool operator==(ClassSet a, ClassSet b) { return a.bits == b.bits; }
};

/// One per-agent action. Grid uses the discrete alternative, goal the
/// 2-vector of velocities.
using Action = std::variant<int, std::array<double, 2>>;

/// One joint decision: exactly one action per agent.
struct JointAction {
  std::vector<Action> actions;
};

/// A natural-language constraint as it moves through the pipeline: raw text,
/// condensed form, embedding (filled lazily), and the derived class labels
/// that power the rule oracle and triplet sampling.
struct LanguageConstraint {
  std::string raw;
  std::string condensed;
  std::vector<double> embedding;  // unit L2 norm once filled
  ClassSet classes;
};

/// Per-episode expected-cost budget.
struct Budget {
  double d = 0.0;
};

/// Result of one environment step. Ground-truth costs are for evaluation and
/// oracle-cost baselines only; the SMALL training path never reads them.
struct StepOutcome {
  double team_reward = 0.0;
  std::vector<double> cost_truth;  // one entry per agent, >= 0
  bool done = false;
};

/// Sum_t gamma^t r_t.
inline double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_return: gamma must be in [0,1)");
  double sum = 0.0;
  double g = 1.0;
  for (const double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("discounted_return: non-finite reward");
    sum += g * r;
    g *= gamma;
  }
  return sum;
}

/// Sum_t gamma^t Sum_i c[t][i] — the team's discounted cost with per-step
/// costs summed over agents before discounting.
inline double discounted_cost_return(const std::vector<std::vector<double>>& costs_per_step,
                                     double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_cost_return: gamma must be in [0,1)");
  double sum = 0.0;
  double g = 1.0;
  for (const auto& step : costs_per_step) {
    double step_sum = 0.0;
    for (const double c : step) {
      if (!(c >= 0.0) || !std::isfinite(c))
        throw std::invalid_argument("discounted_cost_return: costs must be finite and >= 0");
      step_sum += c;
    }
    sum += g * step_sum;
    g *= gamma;
  }
  return sum;
}

}  // namespace lamasafe::core
