#pragma once

#include <string>
#include <vector>

#include "lamasafe/costlm.hpp"
#include "lamasafe/describe.hpp"
#include "lamasafe/grid_env.hpp"

namespace lamasafe::audit {

struct Mismatch {
  std::size_t layout = 0;
  int agent = 0;
  grid::Pos pos_a;
  grid::Pos pos_b;
  std::string constraint;
  int flag = 0;
  bool truth_positive = false;
};

struct AgreementReport {
  long long checks = 0;
  long long mismatches = 0;
  std::vector<Mismatch> samples;  // first few mismatches for diagnostics

  double agreement() const {
    return checks == 0 ? 1.0
                       : 1.0 - static_cast<double>(mismatches) / static_cast<double>(checks);
  }
};

/// All single-hazard boards (every interior cell x every hazard kind) plus
/// one mixed board carrying one tile of each kind. Balls are omitted: they
/// are not hazards and an agent standing on its own ball is unreachable.
inline std::vector<grid::GridWorld> audit_boards(int size) {
  std::vector<grid::GridWorld> boards;
  auto blank = [&] {
    grid::GridWorld w = grid::detail::blank_world(size, size, 2);
    w.ball_collected.assign(2, true);
    return w;
  };
  for (int y = 1; y < size - 1; ++y)
    for (int x = 1; x < size - 1; ++x)
      for (const grid::TileKind kind :
           {grid::TileKind::Lava, grid::TileKind::Water, grid::TileKind::Grass}) {
        grid::GridWorld w = blank();
        w.at(x, y).kind = kind;
        boards.push_back(std::move(w));
      }
  if ((size - 2) * (size - 2) >= 3) {
    grid::GridWorld w = blank();
    w.at(1, 1).kind = grid::TileKind::Lava;
    w.at(2, 1).kind = grid::TileKind::Water;
    w.at(1, 2).kind = grid::TileKind::Grass;
    boards.push_back(std::move(w));
  }
  return boards;
}

/// Exhaustive flag-vs-truth agreement over every two-agent placement of each
/// audit board and every corpus constraint: the rule-oracle flag must be 1
/// exactly when the agent's state-level ground-truth cost is positive. The
/// flag side uses the classes carried on the constraint (the lexicon under
/// audit); the truth side re-derives classes from the text, so a corrupted
/// lexicon shows up as disagreement.
inline AgreementReport oracle_audit(const std::vector<core::LanguageConstraint>& constraints,
                                    int board_size = 5) {
  AgreementReport report;
  costlm::ViolationProvider provider{costlm::ProviderConfig{}};
  const auto boards = audit_boards(board_size);

  for (std::size_t bi = 0; bi < boards.size(); ++bi) {
    grid::GridWorld w = boards[bi];
    std::vector<grid::Pos> cells;
    for (int y = 1; y < board_size - 1; ++y)
      for (int x = 1; x < board_size - 1; ++x) cells.push_back({x, y});

    for (const grid::Pos pa : cells)
      for (const grid::Pos pb : cells) {
        w.agents[0] = pa;
        w.agents[1] = pb;
        for (const auto& constraint : constraints) {
          core::LanguageConstraint truth_constraint = constraint;
          truth_constraint.classes = text::classify_constraint(constraint.raw);
          const auto truth = grid::ground_truth_cost_grid(w, truth_constraint);
          for (int agent = 0; agent < 2; ++agent) {
            const text::EnvDescription d = text::describe_grid(w, agent);
            const int flag = provider.query_violation(d, constraint).value;
            const bool positive = truth[static_cast<std::size_t>(agent)] > 0.0;
            report.checks += 1;
            if ((flag == 1) != positive) {
              report.mismatches += 1;
              if (report.samples.size() < 10)
                report.samples.push_back(
                    {bi, agent, pa, pb, constraint.raw, flag, positive});
            }
          }
        }
      }
  }
  return report;
}

/// Test hook: swap Water and Lava labels so the audit sees a broken lexicon.
inline std::vector<core::LanguageConstraint> corrupt_classes(
    std::vector<core::LanguageConstraint> constraints) {
  for (auto& c : constraints) {
    core::ClassSet swapped;
    for (const auto cls : c.classes.values()) {
      if (cls == core::HazardClass::Water)
        swapped.insert(core::HazardClass::Lava);
      else if (cls == core::HazardClass::Lava)
        swapped.insert(core::HazardClass::Water);
      else
        swapped.insert(cls);
    }
    c.classes = swapped;
  }
  return constraints;
}

}  // namespace lamasafe::audit
