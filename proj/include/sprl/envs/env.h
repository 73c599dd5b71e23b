#pragma once

// Continuous point-mass maze environment.
//
// The agent is a point with position and velocity in world units. Actions are
// 2D accelerations clipped to [-a_max, a_max]^2; velocity magnitude is clamped
// to v_max. Motion resolves collisions by axis-separated sliding: the x move
// is attempted first, then the y move, and a blocked axis keeps its position
// and zeroes its velocity component. Reward is 1 whenever the Euclidean
// distance to the goal-cell center is below reward_radius, else 0; the goal is
// not absorbing, so episodes end only at the step limit.
//
// Observations are fixed-width vectors: (vx, vy, goal_dx, goal_dy) followed by
// a flattened k x k occupancy patch (row-major, 1 = wall) centered on the
// agent's cell; out-of-bounds cells read as walls.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/envs/maze.h"

namespace sprl::envs {

struct EnvConfig {
  double a_max = 0.05;         // acceleration box half-width, world units/step^2
  double v_max = 0.15;         // speed limit, world units/step
  double reward_radius = 0.5;  // goal proximity threshold, world units
  int t_max = 2000;            // step limit (use 400 for data collection)
  int patch_k = 5;             // observation patch side length, odd

  void validate() const {
    if (a_max <= 0 || v_max <= 0 || reward_radius <= 0 || t_max <= 0)
      throw UsageError("EnvConfig: a_max, v_max, reward_radius, t_max must be positive");
    if (patch_k < 1 || patch_k % 2 == 0)
      throw UsageError("EnvConfig: patch_k must be odd and positive");
  }
};

struct EnvState {
  double x = 0, y = 0;    // position, world units
  double vx = 0, vy = 0;  // velocity, world units/step
  int steps_elapsed = 0;
};

// Fixed width 4 + patch_k^2; see header comment for the feature order.
struct Observation {
  std::vector<float> features;
};

inline int observation_dim(int patch_k) { return 4 + patch_k * patch_k; }

// Why an episode ended. Maze episodes end only by timeout (the goal is not
// absorbing); kTerminal exists for synthetic MDPs in tests.
enum class DoneKind { kNotDone, kTimeout, kTerminal };

struct StepResult {
  Observation obs;
  double reward = 0;
  bool done = false;
  DoneKind kind = DoneKind::kNotDone;
  bool collided = false;  // an axis was blocked this step
};

inline double cell_center_x(const MazeLayout& m, Cell c) { return (c.col + 0.5) * m.cell_size; }
inline double cell_center_y(const MazeLayout& m, Cell c) { return (c.row + 0.5) * m.cell_size; }
inline Cell cell_of(const MazeLayout& m, double x, double y) {
  return Cell{int(std::floor(y / m.cell_size)), int(std::floor(x / m.cell_size))};
}

class MazeEnv {
 public:
  explicit MazeEnv(MazeLayout layout, EnvConfig cfg = {})
      : layout_(std::move(layout)), cfg_(cfg) {
    cfg_.validate();
    if (cfg_.v_max >= layout_.cell_size)
      throw UsageError("MazeEnv: v_max must be below cell_size (single-axis moves may skip cells otherwise)");
    reset();
  }

  const MazeLayout& layout() const { return layout_; }
  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  Cell start_cell() const { return start_; }
  Cell goal_cell() const { return goal_; }
  int obs_dim() const { return observation_dim(cfg_.patch_k); }
  bool done() const { return done_; }
  int collision_count() const { return collisions_; }

  Observation reset() { return reset(layout_.start_cell, layout_.goal_cell); }

  Observation reset(Cell start, Cell goal) {
    if (!layout_.free_cell(start) || !layout_.free_cell(goal))
      throw UsageError("MazeEnv::reset: start and goal cells must be free");
    start_ = start;
    goal_ = goal;
    state_ = EnvState{cell_center_x(layout_, start), cell_center_y(layout_, start), 0.0, 0.0, 0};
    done_ = false;
    collisions_ = 0;
    return observe();
  }

  StepResult step(double ax, double ay) {
    if (done_) throw UsageError("MazeEnv::step: episode finished; call reset()");
    if (!std::isfinite(ax) || !std::isfinite(ay))
      throw UsageError("MazeEnv::step: action must be finite");

    ax = std::clamp(ax, -cfg_.a_max, cfg_.a_max);
    ay = std::clamp(ay, -cfg_.a_max, cfg_.a_max);
    double vx = state_.vx + ax;
    double vy = state_.vy + ay;
    const double speed = std::hypot(vx, vy);
    if (speed > cfg_.v_max) {
      const double scale = cfg_.v_max / speed;
      vx *= scale;
      vy *= scale;
    }

    double x = state_.x;
    double y = state_.y;
    bool collided = false;
    {
      const double nx = x + vx;
      if (layout_.free_cell(cell_of(layout_, nx, y))) {
        x = nx;
      } else {
        vx = 0;
        collided = true;
      }
    }
    {
      const double ny = y + vy;
      if (layout_.free_cell(cell_of(layout_, x, ny))) {
        y = ny;
      } else {
        vy = 0;
        collided = true;
      }
    }
    collisions_ += collided ? 1 : 0;
    state_ = EnvState{x, y, vx, vy, state_.steps_elapsed + 1};

    StepResult out;
    out.reward = goal_distance() < cfg_.reward_radius ? 1.0 : 0.0;
    out.done = state_.steps_elapsed >= cfg_.t_max;
    out.kind = out.done ? DoneKind::kTimeout : DoneKind::kNotDone;
    out.collided = collided;
    out.obs = observe();
    done_ = out.done;
    return out;
  }

  double goal_distance() const {
    return std::hypot(state_.x - cell_center_x(layout_, goal_),
                      state_.y - cell_center_y(layout_, goal_));
  }

  Observation observe() const {
    Observation o;
    o.features.reserve(std::size_t(obs_dim()));
    o.features.push_back(float(state_.vx));
    o.features.push_back(float(state_.vy));
    o.features.push_back(float(cell_center_x(layout_, goal_) - state_.x));
    o.features.push_back(float(cell_center_y(layout_, goal_) - state_.y));
    const Cell here = cell_of(layout_, state_.x, state_.y);
    const int half = cfg_.patch_k / 2;
    for (int dr = -half; dr <= half; ++dr)
      for (int dc = -half; dc <= half; ++dc)
        o.features.push_back(layout_.wall(here.row + dr, here.col + dc) ? 1.0f : 0.0f);
    return o;
  }

 private:
  MazeLayout layout_;
  EnvConfig cfg_;
  Cell start_{}, goal_{};
  EnvState state_{};
  bool done_ = false;
  int collisions_ = 0;
};

}  // namespace sprl::envs
