#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lamasafe/core.hpp"
#include "lamasafe/rng.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::goal {

using core::ClassSet;
using core::HazardClass;
using core::JointAction;
using core::StepOutcome;

using Vec2 = std::array<double, 2>;

inline double dist(const Vec2& a, const Vec2& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

struct Circle {
  Vec2 center{};
  double radius = 0.3;
};

struct Box {
  Vec2 center{};
  double half_size = 0.15;
};

enum class Difficulty { Easy, Medium, Hard };

/// Hazard/vase counts per difficulty, with explicit overrides allowed.
struct DifficultySpec {
  Difficulty level = Difficulty::Easy;
  int hazard_override = -1;
  int vase_override = -1;

  int hazard_count() const {
    if (hazard_override >= 0) return hazard_override;
    switch (level) {
      case Difficulty::Easy: return 8;
      case Difficulty::Medium: return 16;
      case Difficulty::Hard: return 24;
    }
    return 8;
  }
  int vase_count() const { return vase_override >= 0 ? vase_override : 5; }
};

/// Continuous square plane with velocity-controlled disc agents, non-contact
/// hazard circles, solid vase boxes, and per-agent relocating goals.
struct GoalWorld {
  double half_extent = 2.0;   // plane is [-2,2]^2
  double agent_radius = 0.2;
  double v_max = 0.1;
  double goal_threshold = 0.3;
  double goal_bonus = 1.0;
  std::vector<Vec2> agents;
  std::vector<Circle> hazards;
  std::vector<Box> vases;
  std::vector<Vec2> goals;       // one per agent
  std::vector<double> goal_dist; // distance to own goal after the last step
  int timestep = 0;
  int max_steps = 1000;
  bool done = false;
  ClassSet constraint_classes;
  Rng relocation_rng{0};  // consumed only when a goal relocates

  int n_agents() const { return static_cast<int>(agents.size()); }
};

namespace detail {

inline bool circle_overlaps_circle(const Vec2& c1, double r1, const Vec2& c2, double r2) {
  return dist(c1, c2) < r1 + r2;
}

inline bool circle_overlaps_box(const Vec2& c, double r, const Box& b) {
  const double cx = std::clamp(c[0], b.center[0] - b.half_size, b.center[0] + b.half_size);
  const double cy = std::clamp(c[1], b.center[1] - b.half_size, b.center[1] + b.half_size);
  const double dx = c[0] - cx, dy = c[1] - cy;
  return dx * dx + dy * dy < r * r;
}

inline bool box_overlaps_box(const Box& a, const Box& b) {
  return std::abs(a.center[0] - b.center[0]) < a.half_size + b.half_size &&
         std::abs(a.center[1] - b.center[1]) < a.half_size + b.half_size;
}

/// A candidate point is "free" if a disc of the given radius there overlaps
/// nothing already placed.
inline bool placement_free(const GoalWorld& w, const Vec2& p, double radius,
                           bool against_agents, bool against_goals) {
  for (const auto& h : w.hazards)
    if (circle_overlaps_circle(p, radius, h.center, h.radius)) return false;
  for (const auto& v : w.vases)
    if (circle_overlaps_box(p, radius, v)) return false;
  if (against_agents)
    for (const auto& a : w.agents)
      if (circle_overlaps_circle(p, radius, a, w.agent_radius)) return false;
  if (against_goals)
    for (const auto& g : w.goals)
      if (circle_overlaps_circle(p, radius, g, 0.1)) return false;
  return true;
}

inline Vec2 sample_point(Rng& rng, double half_extent, double margin) {
  return {rng.uniform(-half_extent + margin, half_extent - margin),
          rng.uniform(-half_extent + margin, half_extent - margin)};
}

}  // namespace detail

namespace detail {

inline GoalWorld try_reset(const DifficultySpec& spec, int n_agents, Rng rng) {
  GoalWorld w;
  constexpr int kMaxTries = 2000;
  auto place = [&](double radius, bool against_agents, bool against_goals) -> Vec2 {
    for (int t = 0; t < kMaxTries; ++t) {
      const Vec2 p = sample_point(rng, w.half_extent, radius);
      if (placement_free(w, p, radius, against_agents, against_goals)) return p;
    }
    throw std::runtime_error("goal::reset: placement infeasible");
  };

  for (int i = 0; i < spec.hazard_count(); ++i)
    w.hazards.push_back({place(0.3, false, false), 0.3});
  for (int i = 0; i < spec.vase_count(); ++i)
    w.vases.push_back({place(0.15 * 1.4142135623730951, false, false), 0.15});
  for (int i = 0; i < n_agents; ++i) w.agents.push_back(place(w.agent_radius, true, false));
  for (int i = 0; i < n_agents; ++i) w.goals.push_back(place(0.1, true, true));

  w.goal_dist.resize(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i)
    w.goal_dist[static_cast<std::size_t>(i)] =
        dist(w.agents[static_cast<std::size_t>(i)], w.goals[static_cast<std::size_t>(i)]);
  return w;
}

}  // namespace detail

/// Rejection-sample a fresh world: hazards, vases, agent starts and goals,
/// all mutually non-overlapping. Deterministic in the seed. Dense layouts
/// (Hard runs near packing saturation) get whole-layout restarts before the
/// infeasibility error.
inline GoalWorld reset(const DifficultySpec& spec, int n_agents, std::uint64_t seed) {
  if (n_agents < 1) throw std::invalid_argument("goal::reset: need >= 1 agent");
  const Rng base(seed);
  constexpr int kMaxRestarts = 20;
  for (int attempt = 0;; ++attempt) {
    try {
      GoalWorld w =
          detail::try_reset(spec, n_agents, base.derive("attempt", static_cast<std::uint64_t>(attempt)));
      w.relocation_rng = base.derive("goal-relocation");
      return w;
    } catch (const std::runtime_error&) {
      if (attempt + 1 >= kMaxRestarts) throw;
    }
  }
}

/// Per-kind radar: distances from the agent's center to every entity within
/// the sensing radius, ascending.
struct RadarReading {
  std::vector<double> hazards;
  std::vector<double> vases;
  std::vector<double> agents;
  std::vector<double> goals;  // own goal only
};

inline RadarReading radar_distances(const GoalWorld& w, int agent, double sensing_radius = 5.0) {
  if (agent < 0 || agent >= w.n_agents())
    throw std::invalid_argument("goal::radar_distances: bad agent");
  const Vec2 p = w.agents[static_cast<std::size_t>(agent)];
  RadarReading r;
  for (const auto& h : w.hazards) {
    const double d = dist(p, h.center);
    if (d <= sensing_radius) r.hazards.push_back(d);
  }
  for (const auto& v : w.vases) {
    const double d = dist(p, v.center);
    if (d <= sensing_radius) r.vases.push_back(d);
  }
  for (int b = 0; b < w.n_agents(); ++b) {
    if (b == agent) continue;
    const double d = dist(p, w.agents[static_cast<std::size_t>(b)]);
    if (d <= sensing_radius) r.agents.push_back(d);
  }
  const double dg = dist(p, w.goals[static_cast<std::size_t>(agent)]);
  if (dg <= sensing_radius) r.goals.push_back(dg);
  std::sort(r.hazards.begin(), r.hazards.end());
  std::sort(r.vases.begin(), r.vases.end());
  std::sort(r.agents.begin(), r.agents.end());
  return r;
}

/// Ground-truth cost: 1 per agent per step if the agent's disc edge is within
/// 1 m of a constrained hazard center and/or another agent's center is within
/// 1 m (strict inequalities). Evaluation-only.
inline std::vector<double> ground_truth_cost_goal(const GoalWorld& w,
                                                  const core::LanguageConstraint& constraint) {
  std::vector<double> cost(static_cast<std::size_t>(w.n_agents()), 0.0);
  for (int a = 0; a < w.n_agents(); ++a) {
    const Vec2 p = w.agents[static_cast<std::size_t>(a)];
    bool violated = false;
    if (constraint.classes.contains(HazardClass::BlueHazard)) {
      for (const auto& h : w.hazards)
        if (dist(p, h.center) - w.agent_radius < 1.0) {
          violated = true;
          break;
        }
    }
    if (!violated && constraint.classes.contains(HazardClass::Collision)) {
      for (int b = 0; b < w.n_agents(); ++b)
        if (b != a && dist(p, w.agents[static_cast<std::size_t>(b)]) < 1.0) {
          violated = true;
          break;
        }
    }
    if (violated) cost[static_cast<std::size_t>(a)] = 1.0;
  }
  return cost;
}

namespace detail {

inline bool overlaps_any_vase(const GoalWorld& w, const Vec2& p) {
  for (const auto& v : w.vases)
    if (circle_overlaps_box(p, w.agent_radius, v)) return true;
  return false;
}

/// Largest collision-free point along p -> q. Steps are shorter than a vase,
/// so only the endpoint needs resolving; 40 bisection rounds pin the contact
/// surface well below positional noise.
inline Vec2 resolve_vase_contact(const GoalWorld& w, const Vec2& p, const Vec2& q) {
  if (!overlaps_any_vase(w, q)) return q;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vec2 m = {p[0] + mid * (q[0] - p[0]), p[1] + mid * (q[1] - p[1])};
    if (overlaps_any_vase(w, m))
      hi = mid;
    else
      lo = mid;
  }
  return {p[0] + lo * (q[0] - p[0]), p[1] + lo * (q[1] - p[1])};
}

}  // namespace detail

/// Kinematic step: clamp velocity to [-v_max, v_max] per component,
/// integrate, clamp to the plane, stop at vase surfaces. Team reward is the
/// per-agent change in goal distance plus a bonus when a goal is reached
/// (which relocates that goal to a fresh unoccupied position).
inline StepOutcome step(GoalWorld& w, const JointAction& joint) {
  if (w.done) throw std::runtime_error("goal::step: episode already terminated");
  if (static_cast<int>(joint.actions.size()) != w.n_agents())
    throw std::invalid_argument("goal::step: one action per agent required");

  StepOutcome out;
  for (int a = 0; a < w.n_agents(); ++a) {
    const auto v = std::get<Vec2>(joint.actions[static_cast<std::size_t>(a)]);
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]))
      throw std::invalid_argument("goal::step: non-finite velocity");
    const Vec2 vel = {std::clamp(v[0], -w.v_max, w.v_max), std::clamp(v[1], -w.v_max, w.v_max)};
    const Vec2 p = w.agents[static_cast<std::size_t>(a)];
    Vec2 q = {std::clamp(p[0] + vel[0], -w.half_extent, w.half_extent),
              std::clamp(p[1] + vel[1], -w.half_extent, w.half_extent)};
    q = detail::resolve_vase_contact(w, p, q);
    w.agents[static_cast<std::size_t>(a)] = q;

    const double before = w.goal_dist[static_cast<std::size_t>(a)];
    double after = dist(q, w.goals[static_cast<std::size_t>(a)]);
    out.team_reward += before - after;

    if (after <= w.goal_threshold) {
      out.team_reward += w.goal_bonus;
      // relocate this goal to a fresh unoccupied spot (away from all agents)
      for (int t = 0; t < 2000; ++t) {
        const Vec2 g = detail::sample_point(w.relocation_rng, w.half_extent, 0.1);
        bool free = detail::placement_free(w, g, 0.1, false, false);
        if (free) {
          for (const auto& ap : w.agents)
            if (dist(g, ap) < w.goal_threshold + w.agent_radius) {
              free = false;
              break;
            }
        }
        if (free) {
          for (int b = 0; b < w.n_agents(); ++b)
            if (b != a && dist(g, w.goals[static_cast<std::size_t>(b)]) < 0.2) {
              free = false;
              break;
            }
        }
        if (free) {
          w.goals[static_cast<std::size_t>(a)] = g;
          break;
        }
        if (t == 1999) throw std::runtime_error("goal::step: goal relocation infeasible");
      }
      after = dist(q, w.goals[static_cast<std::size_t>(a)]);
    }
    w.goal_dist[static_cast<std::size_t>(a)] = after;
  }

  out.cost_truth = ground_truth_cost_goal(w, {.classes = w.constraint_classes});
  w.timestep += 1;
  if (w.timestep >= w.max_steps) w.done = true;
  out.done = w.done;
  return out;
}

inline constexpr int kNearestK = 4;

inline int numeric_feature_size() { return 2 + 2 + 2 * kNearestK + 2 * kNearestK + 2 + 1; }

/// Own position, goal offset, k-nearest hazard/vase offsets (zero-padded),
/// nearest-agent offset, timestep fraction.
inline std::vector<double> numeric_features_goal(const GoalWorld& w, int agent) {
  if (agent < 0 || agent >= w.n_agents())
    throw std::invalid_argument("goal::numeric_features_goal: bad agent");
  const Vec2 p = w.agents[static_cast<std::size_t>(agent)];
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(numeric_feature_size()));
  f.push_back(p[0]);
  f.push_back(p[1]);
  const Vec2 g = w.goals[static_cast<std::size_t>(agent)];
  f.push_back(g[0] - p[0]);
  f.push_back(g[1] - p[1]);

  auto push_nearest = [&](const std::vector<Vec2>& centers) {
    std::vector<std::pair<double, Vec2>> ds;
    for (const auto& c : centers) ds.push_back({dist(p, c), c});
    std::sort(ds.begin(), ds.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int k = 0; k < kNearestK; ++k) {
      if (k < static_cast<int>(ds.size())) {
        f.push_back(ds[static_cast<std::size_t>(k)].second[0] - p[0]);
        f.push_back(ds[static_cast<std::size_t>(k)].second[1] - p[1]);
      } else {
        f.push_back(0.0);
        f.push_back(0.0);
      }
    }
  };
  std::vector<Vec2> hz;
  for (const auto& h : w.hazards) hz.push_back(h.center);
  push_nearest(hz);
  std::vector<Vec2> vs;
  for (const auto& v : w.vases) vs.push_back(v.center);
  push_nearest(vs);

  double best = -1.0;
  Vec2 nearest{0.0, 0.0};
  for (int b = 0; b < w.n_agents(); ++b) {
    if (b == agent) continue;
    const double d = dist(p, w.agents[static_cast<std::size_t>(b)]);
    if (best < 0 || d < best) {
      best = d;
      nearest = w.agents[static_cast<std::size_t>(b)];
    }
  }
  if (best >= 0) {
    f.push_back(nearest[0] - p[0]);
    f.push_back(nearest[1] - p[1]);
  } else {
    f.push_back(0.0);
    f.push_back(0.0);
  }
  f.push_back(static_cast<double>(w.timestep) / static_cast<double>(w.max_steps));
  return f;
}

inline nlohmann::json to_json(const GoalWorld& w) {
  nlohmann::json j;
  j["half_extent"] = w.half_extent;
  j["agent_radius"] = w.agent_radius;
  j["agents"] = nlohmann::json::array();
  for (const auto& a : w.agents) j["agents"].push_back({a[0], a[1]});
  j["hazards"] = nlohmann::json::array();
  for (const auto& h : w.hazards) j["hazards"].push_back({h.center[0], h.center[1], h.radius});
  j["vases"] = nlohmann::json::array();
  for (const auto& v : w.vases) j["vases"].push_back({v.center[0], v.center[1], v.half_size});
  j["goals"] = nlohmann::json::array();
  for (const auto& g : w.goals) j["goals"].push_back({g[0], g[1]});
  j["timestep"] = w.timestep;
  j["max_steps"] = w.max_steps;
  return j;
}

inline GoalWorld from_json(const nlohmann::json& j) {
  GoalWorld w;
  w.half_extent = j.at("half_extent").get<double>();
  w.agent_radius = j.at("agent_radius").get<double>();
  for (const auto& a : j.at("agents")) w.agents.push_back({a[0].get<double>(), a[1].get<double>()});
  for (const auto& h : j.at("hazards"))
    w.hazards.push_back({{h[0].get<double>(), h[1].get<double>()}, h[2].get<double>()});
  for (const auto& v : j.at("vases"))
    w.vases.push_back({{v[0].get<double>(), v[1].get<double>()}, v[2].get<double>()});
  for (const auto& g : j.at("goals")) w.goals.push_back({g[0].get<double>(), g[1].get<double>()});
  w.timestep = j.at("timestep").get<int>();
  w.max_steps = j.at("max_steps").get<int>();
  w.goal_dist.resize(w.agents.size());
  for (int i = 0; i < w.n_agents(); ++i)
    w.goal_dist[static_cast<std::size_t>(i)] =
        dist(w.agents[static_cast<std::size_t>(i)], w.goals[static_cast<std::size_t>(i)]);
  return w;
}

}  // namespace lamasafe::goal
