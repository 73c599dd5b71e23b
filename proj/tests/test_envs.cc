// Maze environment tests: generation invariants against a test-side flood
// fill, dynamics against hand-computed oracles, the planner against a
// test-side BFS, and rollout statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/envs/env.h"
#include "sprl/envs/maze.h"
#include "sprl/envs/planner.h"
#include "sprl/envs/rollouts.h"
#include "sprl/envs/trajectory.h"

using namespace sprl;
using namespace sprl::envs;

namespace {

// Test-side flood fill (iterative stack walk), independent of the library's
// breadth-first helper.
int flood_count(const MazeLayout& m, Cell from) {
  if (!m.free_cell(from)) return 0;
  std::vector<char> seen(std::size_t(m.width) * std::size_t(m.height), 0);
  std::vector<Cell> stack{from};
  seen[std::size_t(from.row) * std::size_t(m.width) + std::size_t(from.col)] = 1;
  int count = 0;
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    ++count;
    const Cell nb[4] = {{c.row - 1, c.col}, {c.row + 1, c.col}, {c.row, c.col - 1}, {c.row, c.col + 1}};
    for (Cell n : nb) {
      if (!m.free_cell(n)) continue;
      char& s = seen[std::size_t(n.row) * std::size_t(m.width) + std::size_t(n.col)];
      if (!s) {
        s = 1;
        stack.push_back(n);
      }
    }
  }
  return count;
}

int count_free(const MazeLayout& m) {
  int n = 0;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) n += m.free_cell(r, c) ? 1 : 0;
  return n;
}

// Test-side BFS shortest-path cost in steps; -1 when unreachable.
int bfs_cost(const MazeLayout& m, Cell start, Cell goal) {
  if (!m.free_cell(start) || !m.free_cell(goal)) return -1;
  std::vector<int> dist(std::size_t(m.width) * std::size_t(m.height), -1);
  auto at = [&](Cell c) -> int& { return dist[std::size_t(c.row) * std::size_t(m.width) + std::size_t(c.col)]; };
  std::vector<Cell> frontier{start};
  at(start) = 0;
  std::size_t head = 0;
  while (head < frontier.size()) {
    const Cell c = frontier[head++];
    if (c == goal) return at(c);
    const Cell nb[4] = {{c.row - 1, c.col}, {c.row + 1, c.col}, {c.row, c.col - 1}, {c.row, c.col + 1}};
    for (Cell n : nb) {
      if (m.free_cell(n) && at(n) < 0) {
        at(n) = at(c) + 1;
        frontier.push_back(n);
      }
    }
  }
  return -1;
}

bool valid_grid_path(const MazeLayout& m, const std::vector<Cell>& path, Cell start, Cell goal) {
  if (path.empty() || !(path.front() == start) || !(path.back() == goal)) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!m.free_cell(path[i])) return false;
    if (i > 0) {
      const int dr = std::abs(path[i].row - path[i - 1].row);
      const int dc = std::abs(path[i].col - path[i - 1].col);
      if (dr + dc != 1) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("generate_maze is deterministic and validates arguments") {
  const MazeLayout a = generate_maze(42, 8, 8, 0.6);
  const MazeLayout b = generate_maze(42, 8, 8, 0.6);
  CHECK(a.walls == b.walls);
  CHECK(a.start_cell == b.start_cell);
  CHECK(a.goal_cell == b.goal_cell);
  CHECK(a.seed == 42);

  int distinct = 0;
  for (std::uint64_t s = 0; s < 10; ++s)
    if (generate_maze(s, 8, 8, 0.6).walls != a.walls) ++distinct;
  CHECK(distinct >= 8);

  CHECK_THROWS_AS(generate_maze(0, 4, 8, 0.6), UsageError);
  CHECK_THROWS_AS(generate_maze(0, 8, 4, 0.6), UsageError);
  CHECK_THROWS_AS(generate_maze(0, 8, 8, 0.0), UsageError);
  CHECK_THROWS_AS(generate_maze(0, 8, 8, 1.2), UsageError);
  // Almost every door closed: no connected layout exists within the retry
  // budget, so generation must fail loudly instead of looping forever.
  CHECK_THROWS_AS(generate_maze(1, 16, 16, 0.01), GenerationError);
}

TEST_CASE("generated layouts are connected with solid borders (flood-fill oracle)") {
  struct Shape {
    int w, h;
    double density;
  };
  const std::vector<Shape> shapes = {{8, 8, 0.6}, {16, 16, 0.6}, {8, 8, 1.0}, {16, 16, 1.0}, {12, 12, 0.6}};
  for (const Shape& sh : shapes) {
    int connected = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const MazeLayout m = generate_maze(seed, sh.w, sh.h, sh.density);
      for (int c = 0; c < m.width; ++c) {
        REQUIRE(m.wall(0, c));
        REQUIRE(m.wall(m.height - 1, c));
      }
      for (int r = 0; r < m.height; ++r) {
        REQUIRE(m.wall(r, 0));
        REQUIRE(m.wall(r, m.width - 1));
      }
      REQUIRE(m.free_cell(m.start_cell));
      REQUIRE(m.free_cell(m.goal_cell));
      REQUIRE_FALSE(m.start_cell == m.goal_cell);

      const int free = count_free(m);
      REQUIRE(free >= (sh.w - 2) * (sh.h - 2) / 3);
      if (flood_count(m, m.start_cell) == free) ++connected;
    }
    CHECK(connected == 100);
  }
}

TEST_CASE("layout text round-trip and fixture validation") {
  const MazeLayout m = generate_maze(7, 8, 8, 0.7);
  const MazeLayout back = layout_from_text(layout_to_text(m));
  CHECK(back.walls == m.walls);
  CHECK(back.width == m.width);
  CHECK(back.height == m.height);
  CHECK(back.start_cell == m.start_cell);
  CHECK(back.goal_cell == m.goal_cell);

  // Disconnected fixtures parse (they exist to exercise planner errors).
  const MazeLayout pocket = layout_from_text(
      "#####\n"
      "#S#.#\n"
      "###.#\n"
      "#G#.#\n"
      "#####\n");
  CHECK(pocket.free_cell(1, 3));
  CHECK(flood_count(pocket, pocket.start_cell) == 1);

  CHECK_THROWS_AS(layout_from_text("#####\n#S.G#\n#####\n"), UsageError);  // too few rows
  CHECK_THROWS_AS(layout_from_text("#####\n#S.G#\n#...#\n#..#\n#####\n"), UsageError);  // ragged
  CHECK_THROWS_AS(layout_from_text("#####\n#S.G#\n#...#\n#....\n#####\n"), UsageError);  // open border
  CHECK_THROWS_AS(layout_from_text("#####\n#S..#\n#...#\n#...#\n#####\n"), UsageError);  // no goal
}

TEST_CASE("reset places the agent at the start center with zero velocity") {
  const MazeLayout m = layout_from_text(
      "#######\n"
      "#S....#\n"
      "#.###.#\n"
      "#.#...#\n"
      "#.#.#G#\n"
      "#.....#\n"
      "#######\n");
  MazeEnv env(m);
  const Observation obs = env.reset();
  CHECK(env.state().x == doctest::Approx(1.5));
  CHECK(env.state().y == doctest::Approx(1.5));
  CHECK(env.state().vx == 0.0);
  CHECK(env.state().vy == 0.0);
  CHECK(env.state().steps_elapsed == 0);

  REQUIRE(int(obs.features.size()) == observation_dim(5));
  CHECK(obs.features[0] == 0.0f);
  CHECK(obs.features[1] == 0.0f);
  // goal_dx/dy equal goal-center minus start-center coordinates.
  CHECK(obs.features[2] == doctest::Approx(5.5 - 1.5));
  CHECK(obs.features[3] == doctest::Approx(4.5 - 1.5));

  const Observation again = env.reset();
  CHECK(again.features == obs.features);

  CHECK_THROWS_AS(env.reset(Cell{0, 0}, m.goal_cell), UsageError);
  CHECK_THROWS_AS(env.reset(m.start_cell, Cell{2, 2}), UsageError);

  EnvConfig bad;
  bad.v_max = 1.5;
  CHECK_THROWS_AS(MazeEnv(m, bad), UsageError);
}

TEST_CASE("observation patch matches a hand-read grid window") {
  const std::vector<std::string> rows = {
      "#######",
      "#S....#",
      "#.###.#",
      "#.#...#",
      "#.#.#G#",
      "#.....#",
      "#######",
  };
  std::string text;
  for (const std::string& r : rows) text += r + "\n";
  const MazeLayout m = layout_from_text(text);
  MazeEnv env(m);

  // The oracle reads the fixture strings directly; out-of-range is a wall.
  auto fixture_wall = [&](int r, int c) {
    if (r < 0 || r >= int(rows.size()) || c < 0 || c >= int(rows[0].size())) return true;
    return rows[std::size_t(r)][std::size_t(c)] == '#';
  };

  for (const Cell agent : {Cell{3, 3}, Cell{1, 1}, Cell{5, 5}}) {
    CAPTURE(agent.row);
    CAPTURE(agent.col);
    const Observation obs = env.reset(agent, m.goal_cell);
    int k = 4;
    for (int dr = -2; dr <= 2; ++dr)
      for (int dc = -2; dc <= 2; ++dc) {
        const float expected = fixture_wall(agent.row + dr, agent.col + dc) ? 1.0f : 0.0f;
        CAPTURE(dr);
        CAPTURE(dc);
        CHECK(obs.features[std::size_t(k)] == expected);
        ++k;
      }
  }
}

TEST_CASE("dynamics: null action, clipping, and the speed clamp") {
  const MazeLayout m = layout_from_text(
      "#########\n"
      "#S......#\n"
      "#.......#\n"
      "#.......#\n"
      "#.......#\n"
      "#.......#\n"
      "#.......#\n"
      "#......G#\n"
      "#########\n");
  MazeEnv env(m);

  SUBCASE("zero action from rest leaves the position unchanged") {
    env.reset();
    const StepResult r = env.step(0.0, 0.0);
    CHECK(env.state().x == 1.5);
    CHECK(env.state().y == 1.5);
    CHECK(r.reward == 0.0);
    CHECK_FALSE(r.done);
  }

  SUBCASE("action components clip to the box") {
    env.reset();
    env.step(10.0, -10.0);
    CHECK(env.state().vx == doctest::Approx(0.05));
    CHECK(env.state().vy == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(env.state().x == doctest::Approx(1.55));
  }

  SUBCASE("velocity magnitude is clamped to v_max") {
    env.reset(Cell{4, 4}, m.goal_cell);
    env.step(0.05, 0.05);
    env.step(0.05, 0.05);
    CHECK(std::hypot(env.state().vx, env.state().vy) == doctest::Approx(std::sqrt(0.02)));
    env.step(0.05, 0.05);
    CHECK(std::hypot(env.state().vx, env.state().vy) == doctest::Approx(0.15));
    CHECK(env.state().vx == doctest::Approx(0.15 / std::sqrt(2.0)));
    CHECK(env.state().vy == doctest::Approx(0.15 / std::sqrt(2.0)));
  }

  SUBCASE("reward is 1 every step inside the reward radius until timeout") {
    EnvConfig cfg;
    cfg.t_max = 10;
    MazeEnv short_env(m, cfg);
    short_env.reset(m.goal_cell, m.goal_cell);
    for (int t = 0; t < 10; ++t) {
      const StepResult r = short_env.step(0.0, 0.0);
      CHECK(r.reward == 1.0);
      CHECK(r.done == (t == 9));
      CHECK(r.kind == (t == 9 ? DoneKind::kTimeout : DoneKind::kNotDone));
    }
    CHECK_THROWS_AS(short_env.step(0.0, 0.0), UsageError);
  }

  SUBCASE("just outside the reward radius earns nothing") {
    env.reset(Cell{7, 6}, m.goal_cell);  // adjacent cell, centers 1.0 apart
    const StepResult r = env.step(0.0, 0.0);
    CHECK(r.reward == 0.0);
  }
}

TEST_CASE("collision slides along the wall: blocked axis zeroed, other preserved") {
  const MazeLayout m = layout_from_text(
      "#########\n"
      "#########\n"
      "#S.....G#\n"
      "#########\n"
      "#########\n");
  MazeEnv env(m);
  env.reset();

  // All actions below are multiples of 1/32, so every intermediate position
  // and velocity is exactly representable and the oracle values are exact.
  const double kA = 0.03125;

  // Pure-y ramp from (1.5, 2.5): vy = kA, 2kA, 3kA, 4kA then coasts; the
  // sixth step would land at y = 3.0625 inside the wall row.
  const double ys[5] = {2.53125, 2.59375, 2.6875, 2.8125, 2.9375};
  const double as[5] = {kA, kA, kA, kA, 0.0};
  for (int t = 0; t < 5; ++t) {
    const StepResult r = env.step(0.0, as[t]);
    CHECK_FALSE(r.collided);
    CHECK(env.state().y == ys[t]);
  }
  const StepResult blocked = env.step(0.0, 0.0);
  CHECK(blocked.collided);
  CHECK(env.collision_count() == 1);
  CHECK(env.state().y == 2.9375);
  CHECK(env.state().vy == 0.0);

  // Creep to y = 2.96875, get blocked once more (target y = 3.03125), then
  // push diagonally: the y move lands exactly on the wall boundary (3.0) and
  // stays blocked while the x component slides freely.
  CHECK_FALSE(env.step(0.0, kA).collided);
  CHECK(env.state().y == 2.96875);
  CHECK(env.step(0.0, kA).collided);
  CHECK(env.state().vy == 0.0);

  const StepResult slide = env.step(kA, kA);
  CHECK(slide.collided);
  CHECK(env.state().x == 1.53125);
  CHECK(env.state().vx == kA);
  CHECK(env.state().y == 2.96875);  // blocked
  CHECK(env.state().vy == 0.0);     // zeroed

  // Sliding right (no further y push; vy was zeroed) reaches the goal.
  double reward = 0.0;
  for (int t = 0; t < 300 && reward == 0.0; ++t) reward = env.step(kA, 0.0).reward;
  CHECK(reward == 1.0);
  CHECK(env.state().y == 2.96875);
}

TEST_CASE("the agent never occupies a wall cell under random actions") {
  const MazeLayout m = generate_maze(3, 8, 8, 0.6);
  EnvConfig cfg;
  cfg.t_max = 500;
  MazeEnv env(m, cfg);
  Rng rng = make_rng(11);
  env.reset();
  for (int t = 0; t < 20000; ++t) {
    const StepResult r = env.step(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
    const Cell c = cell_of(m, env.state().x, env.state().y);
    REQUIRE(m.free_cell(c));
    REQUIRE(std::hypot(env.state().vx, env.state().vy) <= 0.15 + 1e-12);
    if (r.done) env.reset();
  }
}

TEST_CASE("plan_path: degenerate start, open room, and deterministic tie-break") {
  const MazeLayout room = layout_from_text(
      "#######\n"
      "#S....#\n"
      "#.....#\n"
      "#.....#\n"
      "#.....#\n"
      "#....G#\n"
      "#######\n");

  const std::vector<Cell> self = plan_path(room, Cell{2, 2}, Cell{2, 2});
  REQUIRE(self.size() == 1);
  CHECK(self[0] == Cell{2, 2});

  // Opposite corners of the open 5x5 interior: path cell count is the
  // Manhattan distance plus one.
  const std::vector<Cell> corner = plan_path(room, Cell{1, 1}, Cell{5, 5});
  CHECK(int(corner.size()) == 8 + 1);
  CHECK(valid_grid_path(room, corner, Cell{1, 1}, Cell{5, 5}));

  // Two equal-cost routes from (1,1) to (2,2); lexicographic (row, col) pops
  // make the route through (1,2) the unique result.
  const std::vector<Cell> tie = plan_path(room, Cell{1, 1}, Cell{2, 2});
  REQUIRE(tie.size() == 3);
  CHECK(tie[1] == Cell{1, 2});

  const std::vector<Cell> again = plan_path(room, Cell{1, 1}, Cell{5, 5});
  CHECK(again == corner);

  CHECK_THROWS_AS(plan_path(room, Cell{0, 0}, Cell{5, 5}), UsageError);
  const MazeLayout pocket = layout_from_text(
      "#####\n"
      "#S#.#\n"
      "###.#\n"
      "#G#.#\n"
      "#####\n");
  CHECK_THROWS_AS(plan_path(pocket, pocket.start_cell, pocket.goal_cell), PlanningError);
}

TEST_CASE("A* cost equals BFS cost on random layouts (BFS oracle)") {
  Rng rng = make_rng(99);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int size = seed < 70 ? 8 : 16;
    const MazeLayout m = generate_maze(seed, size, size, 0.6);

    std::vector<Cell> free_cells;
    for (int r = 0; r < m.height; ++r)
      for (int c = 0; c < m.width; ++c)
        if (m.free_cell(r, c)) free_cells.push_back({r, c});

    // The layout's own start/goal pair plus random free pairs.
    std::vector<std::pair<Cell, Cell>> cases = {{m.start_cell, m.goal_cell}};
    for (int i = 0; i < 3; ++i)
      cases.push_back({free_cells[std::size_t(uniform_int(rng, 0, int(free_cells.size()) - 1))],
                       free_cells[std::size_t(uniform_int(rng, 0, int(free_cells.size()) - 1))]});

    for (const auto& [s, g] : cases) {
      CAPTURE(seed);
      const std::vector<Cell> path = plan_path(m, s, g);
      const int oracle = bfs_cost(m, s, g);
      REQUIRE(oracle >= 0);
      CHECK(int(path.size()) == oracle + 1);
      CHECK(valid_grid_path(m, path, s, g));
    }
  }
}

TEST_CASE("noise-free expert in a straight corridor closes the goal distance monotonically") {
  const MazeLayout corridor = layout_from_text(
      "#########\n"
      "#########\n"
      "#S.....G#\n"
      "#########\n"
      "#########\n");
  EnvConfig cfg;
  cfg.t_max = 400;
  MazeEnv env(corridor, cfg);
  ExpertConfig ec;
  ec.noise_scale = 0.0;
  ec.subgoal_jitter = 0.0;
  Rng rng = make_rng(0);

  const Trajectory traj = expert_rollout(env, ec, rng);
  validate_trajectory(traj);
  CHECK(traj.reached_goal);
  REQUIRE(traj.length() >= 2);

  for (int t = 0; t + 1 <= traj.length(); ++t) {
    const double prev = std::hypot(traj.observation(t)[2], traj.observation(t)[3]);
    const double next = std::hypot(traj.observation(t + 1)[2], traj.observation(t + 1)[3]);
    CAPTURE(t);
    CHECK(next < prev);
  }
}

TEST_CASE("recorded expert actions replay to the identical trajectory") {
  const MazeLayout m = generate_maze(21, 8, 8, 0.6);
  EnvConfig cfg;
  cfg.t_max = 400;

  MazeEnv env(m, cfg);
  Rng rng = make_rng(5);
  const Trajectory traj = expert_rollout(env, ExpertConfig{}, rng);
  validate_trajectory(traj);
  REQUIRE(traj.length() >= 1);

  MazeEnv replay_env(m, cfg);
  Observation obs = replay_env.reset();
  std::vector<float> replayed(obs.features.begin(), obs.features.end());
  for (int t = 0; t < traj.length(); ++t) {
    const StepResult r = replay_env.step(traj.action(t)[0], traj.action(t)[1]);
    replayed.insert(replayed.end(), r.obs.features.begin(), r.obs.features.end());
  }
  CHECK(replayed == traj.observations);  // bitwise equality

  Rng rng2 = make_rng(5);
  MazeEnv env2(m, cfg);
  const Trajectory traj2 = expert_rollout(env2, ExpertConfig{}, rng2);
  CHECK(traj2.actions == traj.actions);
  CHECK(traj2.observations == traj.observations);
}

TEST_CASE("expert reaches the goal on at least 95% of 8x8 rollouts") {
  EnvConfig cfg;
  cfg.t_max = 400;
  Rng rng = make_rng(1234);
  int reached = 0;
  int total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const MazeLayout m = generate_maze(seed, 8, 8, 0.6);
    MazeEnv env(m, cfg);
    for (int rep = 0; rep < 10; ++rep) {
      const Trajectory traj = expert_rollout(env, ExpertConfig{}, rng);
      reached += traj.reached_goal ? 1 : 0;
      ++total;
    }
  }
  REQUIRE(total == 1000);
  CHECK(reached >= 950);
  MESSAGE("expert success rate: ", reached, "/1000");
}

TEST_CASE("random rollouts: uniform action marginals (KS test) and rare goals") {
  EnvConfig cfg;
  cfg.t_max = 500;
  const MazeLayout m = generate_maze(2, 8, 8, 0.6);
  MazeEnv env(m, cfg);
  Rng rng = make_rng(77);

  std::vector<double> ax, ay;
  for (int rep = 0; rep < 100; ++rep) {
    const Trajectory traj = random_rollout(env, rng);
    validate_trajectory(traj);
    CHECK(traj.length() == 500);
    for (int t = 0; t < traj.length(); ++t) {
      ax.push_back(traj.action(t)[0]);
      ay.push_back(traj.action(t)[1]);
    }
  }
  REQUIRE(ax.size() == 50000);

  // One-sample KS statistic against U(-a_max, a_max); 1.95/sqrt(n) is the
  // 0.1% critical value, loose enough to be stable under a fixed seed.
  auto ks_uniform = [](std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = double(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double cdf = std::clamp((xs[i] + 0.05) / 0.1, 0.0, 1.0);
      d = std::max(d, std::abs(cdf - double(i) / n));
      d = std::max(d, std::abs(double(i + 1) / n - cdf));
    }
    return d;
  };
  CHECK(ks_uniform(ax) < 1.95 / std::sqrt(50000.0));
  CHECK(ks_uniform(ay) < 1.95 / std::sqrt(50000.0));

  // Random motion on the large downstream maze almost never finds the goal.
  const MazeLayout big = generate_maze(7, 16, 16, 0.6);
  MazeEnv big_env(big);  // t_max = 2000
  int reached = 0;
  for (int rep = 0; rep < 100; ++rep)
    reached += random_rollout(big_env, rng).reached_goal ? 1 : 0;
  CHECK(reached < 5);
  MESSAGE("random goal-reach on 16x16: ", reached, "/100");
}
