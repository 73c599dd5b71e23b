#pragma once

// Grid path planning: A* over free cells with unit edge costs and the
// Manhattan-distance heuristic. Ties in the open set are popped in
// lexicographic (row, col) order and a cell's parent is set on strict cost
// improvement only, so the returned path is deterministic.

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/envs/maze.h"

namespace sprl::envs {

// Shortest 4-connected path from start to goal, inclusive of both endpoints.
// Throws UsageError for occupied endpoints, PlanningError when unreachable.
inline std::vector<Cell> plan_path(const MazeLayout& m, Cell start, Cell goal) {
  if (!m.free_cell(start) || !m.free_cell(goal))
    throw UsageError("plan_path: start and goal cells must be free");
  if (start == goal) return {start};

  const auto idx = [&](Cell c) {
    return std::size_t(c.row) * std::size_t(m.width) + std::size_t(c.col);
  };
  const auto heuristic = [&](Cell c) {
    return std::abs(c.row - goal.row) + std::abs(c.col - goal.col);
  };

  const std::size_t n = std::size_t(m.width) * std::size_t(m.height);
  std::vector<int> g(n, std::numeric_limits<int>::max());
  std::vector<int> parent(n, -1);

  using Entry = std::tuple<int, int, int>;  // (f, row, col) — min on f, then (row, col)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  g[idx(start)] = 0;
  open.emplace(heuristic(start), start.row, start.col);

  while (!open.empty()) {
    const auto [f, row, col] = open.top();
    open.pop();
    const Cell c{row, col};
    if (f > g[idx(c)] + heuristic(c)) continue;  // stale entry
    if (c == goal) break;

    const int gc = g[idx(c)];
    const Cell neighbors[4] = {{row - 1, col}, {row + 1, col}, {row, col - 1}, {row, col + 1}};
    for (Cell nb : neighbors) {
      if (!m.free_cell(nb)) continue;
      if (gc + 1 < g[idx(nb)]) {
        g[idx(nb)] = gc + 1;
        parent[idx(nb)] = int(idx(c));
        open.emplace(gc + 1 + heuristic(nb), nb.row, nb.col);
      }
    }
  }

  if (g[idx(goal)] == std::numeric_limits<int>::max())
    throw PlanningError("plan_path: goal unreachable from start");

  std::vector<Cell> path;
  for (int at = int(idx(goal)); at >= 0; at = parent[std::size_t(at)])
    path.push_back(Cell{at / m.width, at % m.width});
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace sprl::envs
