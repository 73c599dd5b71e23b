#pragma once

// Procedurally generated maze layouts.
//
// A layout is a grid of wall/free cells with a solid border. Generation places
// full-span interior wall lines at randomly chosen non-adjacent rows/columns,
// then punches doorways at random positions into the wall segments between
// crossings. Start is a random free cell; goal is the free cell farthest from
// it (breadth-first distance). Layouts are regenerated until the free space is
// fully connected, so every free cell is reachable from every other.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <string>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"

namespace sprl::envs {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct MazeLayout {
  int width = 0;   // columns
  int height = 0;  // rows
  double cell_size = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> walls;  // row-major height x width; 1 = wall
  Cell start_cell;
  Cell goal_cell;

  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }
  // Out-of-bounds coordinates count as walls.
  bool wall(int row, int col) const {
    return !in_bounds(row, col) ||
           walls[std::size_t(row) * std::size_t(width) + std::size_t(col)] != 0;
  }
  bool free_cell(int row, int col) const { return !wall(row, col); }
  bool free_cell(Cell c) const { return free_cell(c.row, c.col); }
  std::uint8_t& at(int row, int col) {
    return walls[std::size_t(row) * std::size_t(width) + std::size_t(col)];
  }
};

// Breadth-first distances (in cells) from `from` over free cells; -1 where
// unreachable or wall. Used for goal placement and connectivity checks.
inline std::vector<int> bfs_distances(const MazeLayout& m, Cell from) {
  std::vector<int> dist(std::size_t(m.width) * std::size_t(m.height), -1);
  if (!m.free_cell(from)) return dist;
  auto idx = [&](Cell c) { return std::size_t(c.row) * std::size_t(m.width) + std::size_t(c.col); };
  std::deque<Cell> queue{from};
  dist[idx(from)] = 0;
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    const int d = dist[idx(c)];
    const Cell neighbors[4] = {{c.row - 1, c.col}, {c.row + 1, c.col},
                               {c.row, c.col - 1}, {c.row, c.col + 1}};
    for (Cell n : neighbors) {
      if (m.free_cell(n) && dist[idx(n)] < 0) {
        dist[idx(n)] = d + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

namespace detail {

// Random maximal set of pairwise non-adjacent line indices in {2..extent-3}.
// Walls two cells apart leave one-cell corridors between them.
inline std::vector<int> sample_wall_lines(Rng& rng, int extent) {
  std::vector<int> candidates;
  for (int i = 2; i <= extent - 3; ++i) candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::vector<int> chosen;
  for (int c : candidates) {
    const bool adjacent = std::any_of(chosen.begin(), chosen.end(),
                                      [&](int k) { return std::abs(k - c) <= 1; });
    if (!adjacent) chosen.push_back(c);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Splits the span [lo, hi] at crossing indices and reports each maximal run of
// non-crossing positions to `segment(a, b)`.
template <typename F>
void for_each_segment(int lo, int hi, const std::vector<int>& crossings, F&& segment) {
  int a = lo;
  for (int x : crossings) {
    if (x > hi) break;
    if (x >= a) {
      if (x - 1 >= a) segment(a, x - 1);
      a = x + 1;
    }
  }
  if (a <= hi) segment(a, hi);
}

}  // namespace detail

// Generates a connected layout, deterministically per (seed, width, height,
// door_density). Each wall segment receives one doorway with probability
// door_density (always, at door_density = 1); candidate layouts whose free
// space is not fully connected are rejected and regenerated from a derived
// stream, up to a bounded number of attempts.
inline MazeLayout generate_maze(std::uint64_t seed, int width, int height,
                                double door_density) {
  if (width < 5 || height < 5)
    throw UsageError("generate_maze: width and height must be >= 5");
  if (!(door_density > 0.0) || door_density > 1.0)
    throw UsageError("generate_maze: door_density must be in (0, 1]");

  constexpr int kMaxAttempts = 200;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = make_rng(seed, std::uint64_t(attempt));

    MazeLayout m;
    m.width = width;
    m.height = height;
    m.cell_size = 1.0;
    m.seed = seed;
    m.walls.assign(std::size_t(width) * std::size_t(height), 0);
    for (int c = 0; c < width; ++c) m.at(0, c) = m.at(height - 1, c) = 1;
    for (int r = 0; r < height; ++r) m.at(r, 0) = m.at(r, width - 1) = 1;

    const std::vector<int> wall_rows = detail::sample_wall_lines(rng, height);
    const std::vector<int> wall_cols = detail::sample_wall_lines(rng, width);
    for (int r : wall_rows)
      for (int c = 1; c <= width - 2; ++c) m.at(r, c) = 1;
    for (int c : wall_cols)
      for (int r = 1; r <= height - 2; ++r) m.at(r, c) = 1;

    for (int r : wall_rows) {
      detail::for_each_segment(1, width - 2, wall_cols, [&](int a, int b) {
        if (uniform(rng, 0.0, 1.0) < door_density) m.at(r, uniform_int(rng, a, b)) = 0;
      });
    }
    for (int c : wall_cols) {
      detail::for_each_segment(1, height - 2, wall_rows, [&](int a, int b) {
        if (uniform(rng, 0.0, 1.0) < door_density) m.at(uniform_int(rng, a, b), c) = 0;
      });
    }

    std::vector<Cell> free_cells;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (m.free_cell(r, c)) free_cells.push_back({r, c});
    if (free_cells.empty()) continue;

    m.start_cell = free_cells[std::size_t(uniform_int(rng, 0, int(free_cells.size()) - 1))];
    const std::vector<int> dist = bfs_distances(m, m.start_cell);

    bool connected = true;
    Cell farthest = m.start_cell;
    int farthest_dist = 0;
    for (Cell c : free_cells) {
      const int d = dist[std::size_t(c.row) * std::size_t(width) + std::size_t(c.col)];
      if (d < 0) {
        connected = false;
        break;
      }
      if (d > farthest_dist) {
        farthest_dist = d;
        farthest = c;
      }
    }
    if (!connected || farthest_dist == 0) continue;

    m.goal_cell = farthest;
    return m;
  }
  throw GenerationError("generate_maze: no connected layout within " +
                        std::to_string(kMaxAttempts) + " attempts (seed=" +
                        std::to_string(seed) + ")");
}

// Plain-text export: '#' wall, '.' free, 'S' start, 'G' goal, one row per line.
inline std::string layout_to_text(const MazeLayout& m) {
  std::string out;
  out.reserve(std::size_t(m.height) * std::size_t(m.width + 1));
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      char ch = m.wall(r, c) ? '#' : '.';
      if (Cell{r, c} == m.start_cell) ch = 'S';
      if (Cell{r, c} == m.goal_cell) ch = 'G';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

// Parses the layout_to_text format. Validates rectangular shape, the solid
// border, and exactly one 'S' and one 'G'. Does NOT require connectivity, so
// fixtures for unreachable-goal error paths can be written by hand.
inline MazeLayout layout_from_text(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  for (char ch : text) {
    if (ch == '\n') {
      if (!line.empty()) lines.push_back(line);
      line.clear();
    } else if (ch != '\r' && ch != ' ') {
      line.push_back(ch);
    }
  }
  if (!line.empty()) lines.push_back(line);
  if (lines.size() < 5) throw UsageError("layout_from_text: need at least 5 rows");

  MazeLayout m;
  m.height = int(lines.size());
  m.width = int(lines[0].size());
  if (m.width < 5) throw UsageError("layout_from_text: need at least 5 columns");
  m.cell_size = 1.0;
  m.walls.assign(std::size_t(m.width) * std::size_t(m.height), 0);

  int n_start = 0, n_goal = 0;
  for (int r = 0; r < m.height; ++r) {
    if (int(lines[std::size_t(r)].size()) != m.width)
      throw UsageError("layout_from_text: rows differ in length");
    for (int c = 0; c < m.width; ++c) {
      switch (lines[std::size_t(r)][std::size_t(c)]) {
        case '#': m.at(r, c) = 1; break;
        case '.': break;
        case 'S': m.start_cell = {r, c}; ++n_start; break;
        case 'G': m.goal_cell = {r, c}; ++n_goal; break;
        default: throw UsageError("layout_from_text: unexpected character");
      }
    }
  }
  if (n_start != 1 || n_goal != 1)
    throw UsageError("layout_from_text: need exactly one 'S' and one 'G'");
  for (int c = 0; c < m.width; ++c)
    if (!m.wall(0, c) || !m.wall(m.height - 1, c))
      throw UsageError("layout_from_text: border rows must be walls");
  for (int r = 0; r < m.height; ++r)
    if (!m.wall(r, 0) || !m.wall(r, m.width - 1))
      throw UsageError("layout_from_text: border columns must be walls");
  return m;
}

}  // namespace sprl::envs
