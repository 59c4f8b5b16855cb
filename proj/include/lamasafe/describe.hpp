#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lamasafe/goal_env.hpp"
#include "lamasafe/grid_env.hpp"

namespace lamasafe::text {

using core::HazardClass;

/// What a description sentence asserts about an entity.
enum class Qualifier { OnTile, Adjacent, SameTile, Distance };

enum class EntityKind { Lava, Water, Grass, Ball, Hazard, Vase, OtherAgent };

struct MentionedEntity {
  EntityKind kind;
  Qualifier qualifier;
  double distance = 0.0;  // only for Qualifier::Distance, as printed (0.1 m rounded)
};

/// Compact per-agent environment description: the text handed to the
/// encoder/LLM plus the structured facts extracted while generating it.
struct EnvDescription {
  int agent = 0;
  std::string text;
  std::vector<MentionedEntity> mentioned;
};

namespace detail {

inline const char* hazard_word(grid::TileKind k) {
  switch (k) {
    case grid::TileKind::Lava: return "lava";
    case grid::TileKind::Water: return "water";
    case grid::TileKind::Grass: return "grass";
    default: return "";
  }
}

inline EntityKind hazard_entity(grid::TileKind k) {
  switch (k) {
    case grid::TileKind::Lava: return EntityKind::Lava;
    case grid::TileKind::Water: return EntityKind::Water;
    case grid::TileKind::Grass: return EntityKind::Grass;
    default: return EntityKind::Ball;
  }
}

inline bool is_hazard_tile(grid::TileKind k) {
  return k == grid::TileKind::Lava || k == grid::TileKind::Water || k == grid::TileKind::Grass;
}

}  // namespace detail

/// Grid descriptor. Template priority: on-hazard > adjacent-hazard >
/// adjacent-ball > safe; when several hazard kinds are adjacent the
/// lava/water/grass enum order decides. A same-cell sentence is appended
/// whenever another agent shares the tile, so collision violations are
/// recoverable from the text alone.
inline EnvDescription describe_grid(const grid::GridWorld& w, int agent) {
  if (agent < 0 || agent >= w.n_agents())
    throw std::invalid_argument("describe_grid: bad agent");
  EnvDescription d;
  d.agent = agent;
  const grid::Pos p = w.agents[static_cast<std::size_t>(agent)];
  const grid::TileKind on = w.kind_at(p.x, p.y);

  if (detail::is_hazard_tile(on)) {
    d.text = std::string("Agent is on a ") + detail::hazard_word(on) + " tile. Hazard detected!";
    d.mentioned.push_back({detail::hazard_entity(on), Qualifier::OnTile});
  } else {
    grid::TileKind adjacent_hazard = grid::TileKind::Empty;
    bool adjacent_ball = false;
    static constexpr int dx[4] = {0, 0, -1, 1};
    static constexpr int dy[4] = {-1, 1, 0, 0};
    for (const grid::TileKind want :
         {grid::TileKind::Lava, grid::TileKind::Water, grid::TileKind::Grass}) {
      for (int k = 0; k < 4 && adjacent_hazard == grid::TileKind::Empty; ++k)
        if (w.kind_at(p.x + dx[k], p.y + dy[k]) == want) adjacent_hazard = want;
      if (adjacent_hazard != grid::TileKind::Empty) break;
    }
    for (int k = 0; k < 4; ++k)
      if (w.kind_at(p.x + dx[k], p.y + dy[k]) == grid::TileKind::Ball) adjacent_ball = true;

    if (adjacent_hazard != grid::TileKind::Empty) {
      d.text = std::string("Agent is adjacent to a ") + detail::hazard_word(adjacent_hazard) +
               " tile. Hazard nearby!";
      d.mentioned.push_back({detail::hazard_entity(adjacent_hazard), Qualifier::Adjacent});
    } else if (adjacent_ball) {
      d.text = "Agent is adjacent to a reward ball. Collect the ball!";
      d.mentioned.push_back({EntityKind::Ball, Qualifier::Adjacent});
    } else {
      d.text = "Agent is on a safe tile. No hazards detected.";
    }
  }

  for (int b = 0; b < w.n_agents(); ++b) {
    if (b != agent && w.agents[static_cast<std::size_t>(b)] == p) {
      d.text += " Agent is on the same tile as another agent. Collision detected!";
      d.mentioned.push_back({EntityKind::OtherAgent, Qualifier::SameTile});
      break;
    }
  }
  return d;
}

namespace detail {

/// 0.1 m rounding, printed as "1m" / "2.5m".
inline double round_tenth(double d) { return std::round(d * 10.0) / 10.0; }

inline std::string format_distance(double d) {
  const double r = round_tenth(d);
  const long long whole = static_cast<long long>(std::llround(r * 10.0));
  std::string s = std::to_string(whole / 10);
  if (whole % 10 != 0) s += "." + std::to_string(whole % 10);
  return s + "m";
}

inline std::string join_distances(const std::vector<double>& ds) {
  std::string s;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (i > 0) s += (i + 1 == ds.size()) ? " and " : ", ";
    s += format_distance(ds[i]);
  }
  return s;
}

}  // namespace detail

/// Goal descriptor: radar sentences for up to the three nearest hazards,
/// vases and other agents (distances rounded to 0.1 m, ascending), or a
/// nothing-around sentence when all lists are empty.
inline EnvDescription describe_goal(const goal::GoalWorld& w, int agent,
                                    double sensing_radius = 5.0) {
  const goal::RadarReading radar = goal::radar_distances(w, agent, sensing_radius);
  EnvDescription d;
  d.agent = agent;

  auto append_kind = [&](const std::vector<double>& list, const char* label, EntityKind kind) {
    if (list.empty()) return;
    std::vector<double> shown;
    for (std::size_t i = 0; i < list.size() && i < 3; ++i)
      shown.push_back(detail::round_tenth(list[i]));
    if (!d.text.empty()) d.text += " ";
    d.text += std::string(label) + " have been detected within " +
              detail::join_distances(shown) + " of you.";
    for (const double dd : shown) d.mentioned.push_back({kind, Qualifier::Distance, dd});
  };
  append_kind(radar.hazards, "Hazards", EntityKind::Hazard);
  append_kind(radar.vases, "Vases", EntityKind::Vase);
  append_kind(radar.agents, "Agents", EntityKind::OtherAgent);
  if (d.text.empty()) d.text = "There is nothing around you.";
  return d;
}

}  // namespace lamasafe::text
