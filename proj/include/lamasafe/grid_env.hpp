#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamasafe/core.hpp"
#include "lamasafe/rng.hpp"

#include <nlohmann/json.hpp>

namespace lamasafe::grid {

using core::ClassSet;
using core::HazardClass;
using core::JointAction;
using core::StepOutcome;

enum class TileKind : std::uint8_t { Empty = 0, Wall, Lava, Water, Grass, Ball };

inline constexpr int kTileKindCount = 6;

struct Tile {
  TileKind kind = TileKind::Empty;
  int ball_owner = -1;  // valid iff kind == Ball
};

enum class Move : int { Up = 0, Down, Left, Right, Stay };

inline constexpr int kMoveCount = 5;

struct Pos {
  int x = 0;
  int y = 0;
  friend bool operator==(Pos a, Pos b) { return a.x == b.x && a.y == b.y; }
};

/// Discrete multi-agent grid world. Border cells are walls, hazards are
/// traversable (the cost is the deterrent), one target ball per agent,
/// team reward decays linearly over the episode.
struct GridWorld {
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;  // row-major
  std::vector<Pos> agents;
  std::vector<Pos> balls;             // initial ball cell per agent
  std::vector<bool> ball_collected;   // collected balls are removed from tiles
  int timestep = 0;
  int max_steps = 300;
  bool done = false;
  ClassSet constraint_classes;  // the active episode constraint, truth costs only

  int n_agents() const { return static_cast<int>(agents.size()); }

  Tile& at(int x, int y) { return tiles[static_cast<std::size_t>(y * width + x)]; }
  const Tile& at(int x, int y) const { return tiles[static_cast<std::size_t>(y * width + x)]; }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  /// Tile kind with out-of-board treated as Wall.
  TileKind kind_at(int x, int y) const {
    return in_bounds(x, y) ? at(x, y).kind : TileKind::Wall;
  }

  bool all_collected() const {
    return std::all_of(ball_collected.begin(), ball_collected.end(), [](bool b) { return b; });
  }
};

/// 3*(1 - 0.9*t/max_steps): 3.0 at t=0 down to 0.3 at t=max_steps.
inline double reward_decay(int t, int max_steps) {
  if (t < 0 || t > max_steps) throw std::invalid_argument("reward_decay: t out of range");
  return 3.0 * (1.0 - 0.9 * static_cast<double>(t) / static_cast<double>(max_steps));
}

namespace detail {

inline GridWorld blank_world(int width, int height, int n_agents) {
  GridWorld w;
  w.width = width;
  w.height = height;
  w.tiles.assign(static_cast<std::size_t>(width * height), Tile{});
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (x == 0 || y == 0 || x == width - 1 || y == height - 1) w.at(x, y).kind = TileKind::Wall;
  w.agents.resize(static_cast<std::size_t>(n_agents));
  w.balls.resize(static_cast<std::size_t>(n_agents));
  w.ball_collected.assign(static_cast<std::size_t>(n_agents), false);
  return w;
}

/// BFS over non-wall cells.
inline bool reachable_ignoring_hazards(const GridWorld& w, Pos from, Pos to) {
  std::vector<char> seen(static_cast<std::size_t>(w.width * w.height), 0);
  std::deque<Pos> q{from};
  seen[static_cast<std::size_t>(from.y * w.width + from.x)] = 1;
  while (!q.empty()) {
    const Pos p = q.front();
    q.pop_front();
    if (p == to) return true;
    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const int nx = p.x + dx[k], ny = p.y + dy[k];
      if (!w.in_bounds(nx, ny) || w.kind_at(nx, ny) == TileKind::Wall) continue;
      auto& s = seen[static_cast<std::size_t>(ny * w.width + nx)];
      if (!s) {
        s = 1;
        q.push_back({nx, ny});
      }
    }
  }
  return false;
}

}  // namespace detail

/// Random layout: `hazard_count` hazards split as evenly as possible among
/// lava/water/grass and scattered over the interior, then one start cell and
/// one ball per agent on the remaining free cells.
inline GridWorld generate_random_layout(int size, int hazard_count, int n_agents,
                                        std::uint64_t seed) {
  if (size < 5) throw std::invalid_argument("generate_random_layout: size must be >= 5");
  if (n_agents < 1) throw std::invalid_argument("generate_random_layout: need >= 1 agent");
  const int interior = (size - 2) * (size - 2);
  if (hazard_count < 0 || hazard_count + n_agents * 2 > interior)
    throw std::invalid_argument("generate_random_layout: placements exceed interior cells");

  Rng rng(seed);
  GridWorld w = detail::blank_world(size, size, n_agents);

  std::vector<Pos> cells;
  for (int y = 1; y < size - 1; ++y)
    for (int x = 1; x < size - 1; ++x) cells.push_back({x, y});
  rng.shuffle(cells);

  std::size_t next = 0;
  for (int i = 0; i < hazard_count; ++i) {
    const TileKind kind =
        (i % 3 == 0) ? TileKind::Lava : (i % 3 == 1) ? TileKind::Water : TileKind::Grass;
    const Pos p = cells[next++];
    w.at(p.x, p.y).kind = kind;
  }
  for (int a = 0; a < n_agents; ++a) w.agents[static_cast<std::size_t>(a)] = cells[next++];
  for (int a = 0; a < n_agents; ++a) {
    const Pos p = cells[next++];
    w.at(p.x, p.y) = Tile{TileKind::Ball, a};
    w.balls[static_cast<std::size_t>(a)] = p;
  }

  for (int a = 0; a < n_agents; ++a) {
    if (!detail::reachable_ignoring_hazards(w, w.agents[static_cast<std::size_t>(a)],
                                            w.balls[static_cast<std::size_t>(a)]))
      throw std::runtime_error("generate_random_layout: ball unreachable");
  }
  return w;
}

namespace detail {

// Canonical One-Path corridors on the 8x8 board (interior 1..6). The two
// corridors are simple paths, never touch themselves or each other off-path,
// and each has >= 3 turns, so the lava-free simple path per agent is unique.
inline const std::vector<std::vector<Pos>>& onepath_corridors() {
  static const std::vector<std::vector<Pos>> cs = {
      {{1, 1}, {2, 1}, {3, 1}, {3, 2}, {3, 3}, {4, 3}, {5, 3}, {5, 2}, {5, 1}, {6, 1}},
      {{1, 5}, {2, 5}, {3, 5}, {3, 6}, {4, 6}, {5, 6}, {5, 5}, {6, 5}, {6, 4}},
  };
  return cs;
}

inline Pos dihedral(Pos p, int variant, int size) {
  const int m = size - 1;
  int x = p.x, y = p.y;
  if (variant & 1) x = m - x;               // horizontal flip
  if (variant & 2) y = m - y;               // vertical flip
  if (variant & 4) std::swap(x, y);         // transpose
  return {x, y};
}

}  // namespace detail

/// One-Path layout: 8x8 board, interior all lava except one winding
/// corridor per agent from its start to its ball. The seed picks one of the
/// eight symmetries of the canonical board.
inline GridWorld generate_onepath_layout(int n_agents, std::uint64_t seed) {
  if (n_agents < 1 || n_agents > 2)
    throw std::invalid_argument("generate_onepath_layout: supports 1 or 2 agents");
  constexpr int size = 8;
  Rng rng(seed);
  const int variant = static_cast<int>(rng.uniform_int(8));

  GridWorld w = detail::blank_world(size, size, n_agents);
  for (int y = 1; y < size - 1; ++y)
    for (int x = 1; x < size - 1; ++x) w.at(x, y).kind = TileKind::Lava;

  for (int a = 0; a < n_agents; ++a) {
    const auto& corridor = detail::onepath_corridors()[static_cast<std::size_t>(a)];
    for (const Pos c : corridor) {
      const Pos p = detail::dihedral(c, variant, size);
      w.at(p.x, p.y).kind = TileKind::Empty;
    }
    const Pos start = detail::dihedral(corridor.front(), variant, size);
    const Pos end = detail::dihedral(corridor.back(), variant, size);
    w.agents[static_cast<std::size_t>(a)] = start;
    w.at(end.x, end.y) = Tile{TileKind::Ball, a};
    w.balls[static_cast<std::size_t>(a)] = end;
  }
  return w;
}

/// State-level ground-truth cost: 1 per agent standing on a tile of a
/// constrained hazard kind, plus 1 per agent sharing a cell with another
/// agent when the constraint names collisions. Evaluation-only signal.
inline std::vector<double> ground_truth_cost_grid(const GridWorld& w,
                                                  const core::LanguageConstraint& constraint) {
  std::vector<double> cost(static_cast<std::size_t>(w.n_agents()), 0.0);
  for (int a = 0; a < w.n_agents(); ++a) {
    const Pos p = w.agents[static_cast<std::size_t>(a)];
    const TileKind k = w.kind_at(p.x, p.y);
    const bool on_constrained =
        (k == TileKind::Lava && constraint.classes.contains(HazardClass::Lava)) ||
        (k == TileKind::Water && constraint.classes.contains(HazardClass::Water)) ||
        (k == TileKind::Grass && constraint.classes.contains(HazardClass::Grass));
    if (on_constrained) cost[static_cast<std::size_t>(a)] += 1.0;
    if (constraint.classes.contains(HazardClass::Collision)) {
      for (int b = 0; b < w.n_agents(); ++b) {
        if (b != a && w.agents[static_cast<std::size_t>(b)] == p) {
          cost[static_cast<std::size_t>(a)] += 1.0;
          break;
        }
      }
    }
  }
  return cost;
}

/// Simultaneous move step. Agents move one cell unless the target is a wall;
/// collecting the own ball pays reward_decay(t); swap-throughs count as
/// collisions for the truth cost. The episode ends when every ball is
/// collected or at max_steps.
inline StepOutcome step(GridWorld& w, const JointAction& joint) {
  if (w.done) throw std::runtime_error("grid::step: episode already terminated");
  if (static_cast<int>(joint.actions.size()) != w.n_agents())
    throw std::invalid_argument("grid::step: one action per agent required");

  const std::vector<Pos> prev = w.agents;
  for (int a = 0; a < w.n_agents(); ++a) {
    const int mv = std::get<int>(joint.actions[static_cast<std::size_t>(a)]);
    if (mv < 0 || mv >= kMoveCount) throw std::invalid_argument("grid::step: bad move index");
    static constexpr int dx[kMoveCount] = {0, 0, -1, 1, 0};
    static constexpr int dy[kMoveCount] = {-1, 1, 0, 0, 0};
    Pos target = {prev[static_cast<std::size_t>(a)].x + dx[mv],
                  prev[static_cast<std::size_t>(a)].y + dy[mv]};
    if (w.kind_at(target.x, target.y) == TileKind::Wall) target = prev[static_cast<std::size_t>(a)];
    w.agents[static_cast<std::size_t>(a)] = target;
  }

  StepOutcome out;
  for (int a = 0; a < w.n_agents(); ++a) {
    const Pos p = w.agents[static_cast<std::size_t>(a)];
    const Tile& t = w.at(p.x, p.y);
    if (t.kind == TileKind::Ball && t.ball_owner == a &&
        !w.ball_collected[static_cast<std::size_t>(a)]) {
      w.ball_collected[static_cast<std::size_t>(a)] = true;
      out.team_reward += reward_decay(w.timestep, w.max_steps);
      w.at(p.x, p.y) = Tile{};  // ball removed from the board
    }
  }

  out.cost_truth = ground_truth_cost_grid(w, {.classes = w.constraint_classes});
  if (w.constraint_classes.contains(HazardClass::Collision)) {
    for (int a = 0; a < w.n_agents(); ++a)
      for (int b = a + 1; b < w.n_agents(); ++b) {
        const bool swapped = w.agents[static_cast<std::size_t>(a)] == prev[static_cast<std::size_t>(b)] &&
                             w.agents[static_cast<std::size_t>(b)] == prev[static_cast<std::size_t>(a)] &&
                             !(prev[static_cast<std::size_t>(a)] == prev[static_cast<std::size_t>(b)]);
        if (swapped) {
          out.cost_truth[static_cast<std::size_t>(a)] += 1.0;
          out.cost_truth[static_cast<std::size_t>(b)] += 1.0;
        }
      }
  }

  w.timestep += 1;
  if (w.all_collected() || w.timestep >= w.max_steps) w.done = true;
  out.done = w.done;
  return out;
}

inline constexpr int kFeatureWindow = 5;

inline int numeric_feature_size() {
  return kFeatureWindow * kFeatureWindow * kTileKindCount + 2 + 2 + 1;
}

/// Egocentric features: one-hot tile kinds of the 5x5 window (off-board =
/// Wall), own normalized position, unit offset toward the own ball, and the
/// timestep fraction.
inline std::vector<double> numeric_features(const GridWorld& w, int agent) {
  if (agent < 0 || agent >= w.n_agents())
    throw std::invalid_argument("grid::numeric_features: bad agent");
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(numeric_feature_size()));
  const Pos p = w.agents[static_cast<std::size_t>(agent)];
  const int r = kFeatureWindow / 2;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const TileKind k = w.kind_at(p.x + dx, p.y + dy);
      for (int kk = 0; kk < kTileKindCount; ++kk)
        f.push_back(kk == static_cast<int>(k) ? 1.0 : 0.0);
    }
  f.push_back(static_cast<double>(p.x) / static_cast<double>(w.width - 1));
  f.push_back(static_cast<double>(p.y) / static_cast<double>(w.height - 1));
  if (w.ball_collected[static_cast<std::size_t>(agent)]) {
    f.push_back(0.0);
    f.push_back(0.0);
  } else {
    const Pos b = w.balls[static_cast<std::size_t>(agent)];
    const double dx = static_cast<double>(b.x - p.x), dy = static_cast<double>(b.y - p.y);
    const double n = std::sqrt(dx * dx + dy * dy);
    f.push_back(n > 0 ? dx / n : 0.0);
    f.push_back(n > 0 ? dy / n : 0.0);
  }
  f.push_back(static_cast<double>(w.timestep) / static_cast<double>(w.max_steps));
  return f;
}

inline nlohmann::json to_json(const GridWorld& w) {
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : w.tiles) tiles.push_back(static_cast<int>(t.kind));
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& p : w.agents) agents.push_back({p.x, p.y});
  nlohmann::json balls = nlohmann::json::array();
  for (int a = 0; a < w.n_agents(); ++a) {
    if (w.ball_collected[static_cast<std::size_t>(a)]) continue;
    const Pos p = w.balls[static_cast<std::size_t>(a)];
    balls.push_back({p.x, p.y, a});
  }
  return {{"width", w.width}, {"height", w.height}, {"tiles", tiles},
          {"agents", agents}, {"balls", balls}};
}

inline GridWorld from_json(const nlohmann::json& j) {
  GridWorld w;
  w.width = j.at("width").get<int>();
  w.height = j.at("height").get<int>();
  const auto& tiles = j.at("tiles");
  if (static_cast<int>(tiles.size()) != w.width * w.height)
    throw std::runtime_error("grid::from_json: tile count mismatch");
  w.tiles.resize(tiles.size());
  for (std::size_t i = 0; i < tiles.size(); ++i)
    w.tiles[i].kind = static_cast<TileKind>(tiles[i].get<int>());
  for (const auto& a : j.at("agents")) w.agents.push_back({a[0].get<int>(), a[1].get<int>()});
  w.balls.resize(w.agents.size());
  w.ball_collected.assign(w.agents.size(), true);
  for (const auto& b : j.at("balls")) {
    const int x = b[0].get<int>(), y = b[1].get<int>(), owner = b[2].get<int>();
    w.at(x, y) = Tile{TileKind::Ball, owner};
    w.balls[static_cast<std::size_t>(owner)] = {x, y};
    w.ball_collected[static_cast<std::size_t>(owner)] = false;
  }
  return w;
}

}  // namespace lamasafe::grid
