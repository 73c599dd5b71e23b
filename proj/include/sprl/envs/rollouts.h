#pragma once

// Trajectory collection policies.
//
// expert_rollout: plans a grid path to the goal, then follows it with a
// proportional controller — desired velocity points at the current waypoint
// (norm-clamped to v_max) and the action is the velocity error, plus Gaussian
// exploration noise, clipped to the action box. Intermediate waypoints are
// jittered within their cells so repeated layouts yield varied paths. The
// rollout ends at the first rewarded step (reached_goal = true) or at the
// environment step limit (kept, flagged reached_goal = false).
//
// random_rollout: uniform actions over the action box for the full step
// limit; reached_goal records whether any step was rewarded.
//
// Controller gains and noise defaults are fixtures chosen for this world
// scale, not values reconstructed from elsewhere.

#include <cmath>
#include <vector>

#include "sprl/common/rng.h"
#include "sprl/envs/env.h"
#include "sprl/envs/planner.h"
#include "sprl/envs/trajectory.h"

namespace sprl::envs {

struct ExpertConfig {
  double noise_scale = 0.01;     // std-dev of Gaussian action noise
  double subgoal_jitter = 0.2;   // waypoint offset bound, world units
  double waypoint_gain = 1.0;    // desired velocity per unit of waypoint offset
  double capture_radius = 0.35;  // advance past a waypoint inside this distance
};

namespace detail {

inline void append_observation(Trajectory& traj, const Observation& obs) {
  traj.observations.insert(traj.observations.end(), obs.features.begin(), obs.features.end());
}

inline void append_action(Trajectory& traj, double ax, double ay) {
  traj.actions.push_back(float(ax));
  traj.actions.push_back(float(ay));
}

}  // namespace detail

inline Trajectory expert_rollout(MazeEnv& env, const ExpertConfig& ec, Rng& rng) {
  const MazeLayout& m = env.layout();
  const EnvConfig& cfg = env.config();
  const std::vector<Cell> path = plan_path(m, m.start_cell, m.goal_cell);

  // Waypoints at cell centers; jitter the intermediate ones, keeping a margin
  // to the cell border so the target stays in free space. The goal waypoint is
  // left exact.
  std::vector<std::pair<double, double>> waypoints;
  waypoints.reserve(path.size());
  const double margin = std::min(ec.subgoal_jitter, 0.5 * m.cell_size - 0.1);
  for (std::size_t i = 0; i < path.size(); ++i) {
    double wx = cell_center_x(m, path[i]);
    double wy = cell_center_y(m, path[i]);
    if (i + 1 < path.size() && i > 0 && margin > 0) {
      wx += uniform(rng, -margin, margin);
      wy += uniform(rng, -margin, margin);
    }
    waypoints.emplace_back(wx, wy);
  }

  Trajectory traj;
  traj.obs_dim = env.obs_dim();
  traj.action_dim = 2;
  traj.layout_seed = m.seed;
  traj.source_tag = "expert";

  detail::append_observation(traj, env.reset());
  std::size_t wp = 0;
  while (true) {
    const EnvState& s = env.state();
    while (wp + 1 < waypoints.size() &&
           std::hypot(waypoints[wp].first - s.x, waypoints[wp].second - s.y) < ec.capture_radius)
      ++wp;

    double vdx = ec.waypoint_gain * (waypoints[wp].first - s.x);
    double vdy = ec.waypoint_gain * (waypoints[wp].second - s.y);
    const double vnorm = std::hypot(vdx, vdy);
    if (vnorm > cfg.v_max) {
      vdx *= cfg.v_max / vnorm;
      vdy *= cfg.v_max / vnorm;
    }
    double ax = vdx - s.vx;
    double ay = vdy - s.vy;
    if (ec.noise_scale > 0) {
      ax += ec.noise_scale * normal(rng);
      ay += ec.noise_scale * normal(rng);
    }
    // Round to storage precision before executing so replaying the recorded
    // actions reproduces the trajectory exactly.
    const float fax = float(std::clamp(ax, -cfg.a_max, cfg.a_max));
    const float fay = float(std::clamp(ay, -cfg.a_max, cfg.a_max));

    const StepResult r = env.step(fax, fay);
    detail::append_action(traj, fax, fay);
    detail::append_observation(traj, r.obs);
    if (r.reward > 0) {
      traj.reached_goal = true;
      break;
    }
    if (r.done) break;
  }
  return traj;
}

inline Trajectory random_rollout(MazeEnv& env, Rng& rng) {
  const EnvConfig& cfg = env.config();

  Trajectory traj;
  traj.obs_dim = env.obs_dim();
  traj.action_dim = 2;
  traj.layout_seed = env.layout().seed;
  traj.source_tag = "random";

  detail::append_observation(traj, env.reset());
  while (true) {
    const float ax = float(uniform(rng, -cfg.a_max, cfg.a_max));
    const float ay = float(uniform(rng, -cfg.a_max, cfg.a_max));
    const StepResult r = env.step(ax, ay);
    detail::append_action(traj, ax, ay);
    detail::append_observation(traj, r.obs);
    if (r.reward > 0) traj.reached_goal = true;
    if (r.done) break;
  }
  return traj;
}

}  // namespace sprl::envs
