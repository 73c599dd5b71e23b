// Executing latent decisions in the environment.
//
// A SkillExecutor turns one latent into the primitive actions it commands:
// through the frozen skill decoder (horizon-H variants) or as-is (flat
// variants, where the latent already is the primitive action).  hier_step
// runs one decision to completion -- early-stopping at episode end -- and
// returns the H-step transition the replay buffer stores.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/envs/env.h"
#include "sprl/envs/maze.h"
#include "sprl/rl/agent.h"
#include "sprl/rl/replay.h"
#include "sprl/skillmodel/model.h"

namespace sprl::rl {

// Decoder for latents.  With a model, a latent expands to model->cfg.horizon
// primitive actions (the decoder mean, in raw environment units).  Without
// one, the latent is the primitive action itself.
template <class S>
struct SkillExecutor {
  skillmodel::SkillModel<S>* decoder = nullptr;
  int action_dim = 2;

  int horizon() const { return decoder ? decoder->cfg.horizon : 1; }
  int latent_dim() const { return decoder ? decoder->cfg.z_dim : action_dim; }

  // Latent -> flat [horizon * action_dim] primitive action sequence.
  std::vector<float> expand(const std::vector<S>& z) const {
    if (int(z.size()) != latent_dim())
      throw DimensionError("executor: latent has wrong length");
    std::vector<float> actions;
    if (decoder) {
      std::vector<S> seq = skillmodel::decode_skill(*decoder, z);
      actions.assign(seq.begin(), seq.end());
    } else {
      actions.assign(z.begin(), z.end());
    }
    return actions;
  }
};

// Where a decision's latent comes from during a rollout.
enum class SkillSource { kPolicy, kPrior, kUniform };

// Samples the latent for one decision.  `range` bounds uniform draws and, for
// identity executors (where the latent is executed directly as the action),
// squashes prior samples the same way policy samples are squashed -- the flat
// prior's Gaussian lives in pre-squash space.
template <class S>
std::vector<S> sample_latent(Agent<S>* agent, const SkillExecutor<S>& ex,
                             const PriorHandle<S>& prior, SkillSource source,
                             const std::vector<float>& obs, double range,
                             Rng& rng) {
  switch (source) {
    case SkillSource::kPolicy: {
      if (agent == nullptr)
        throw UsageError("rollout: policy source requires an agent");
      return policy_act_sampled(*agent, obs, rng);
    }
    case SkillSource::kPrior: {
      if (prior.model == nullptr)
        throw UsageError("rollout: prior source requires a learned prior");
      std::vector<S> z =
          skillmodel::sample_skill_from_prior(*prior.model, obs, rng);
      if (ex.decoder == nullptr) {
        for (auto& v : z) v = S(range * std::tanh(double(v)));
      }
      return z;
    }
    case SkillSource::kUniform: {
      std::vector<S> z(std::size_t(ex.latent_dim()));
      for (auto& v : z) v = S(uniform(rng, -range, range));
      return z;
    }
  }
  throw UsageError("rollout: unknown skill source");
}

// Uniform latent sampling needs the box bound even without an agent.
template <class S>
std::vector<S> sample_uniform_latent(const SkillExecutor<S>& ex, double range,
                                     Rng& rng) {
  std::vector<S> z(std::size_t(ex.latent_dim()));
  for (auto& v : z) v = S(uniform(rng, -range, range));
  return z;
}

// Executes one decision from the environment's current state: observe, pick
// z, run the decoded actions until the window ends or the episode does, and
// package the H-step transition.  reward_sum covers only the steps actually
// executed; the done kind is the final primitive step's (timeouts bootstrap
// later, true terminals do not).
template <class S>
HStepTransition hier_step(envs::MazeEnv& env, const std::vector<S>& z,
                          const SkillExecutor<S>& ex) {
  if (env.done())
    throw UsageError("hier_step: episode already finished; reset first");
  for (S v : z)
    if (!std::isfinite(double(v)))
      throw NumericalError("hier_step: latent is not finite");
  HStepTransition tr;
  tr.state = env.observe().features;
  tr.skill.assign(z.begin(), z.end());
  const std::vector<float> actions = ex.expand(z);
  const int h = ex.horizon();
  envs::DoneKind kind = envs::DoneKind::kNotDone;
  double reward = 0.0;
  int steps = 0;
  for (int t = 0; t < h; ++t) {
    const auto res = env.step(actions[std::size_t(2 * t)],
                              actions[std::size_t(2 * t + 1)]);
    reward += res.reward;
    ++steps;
    kind = res.kind;
    if (res.done) break;
  }
  tr.reward_sum = float(reward);
  tr.next_state = env.observe().features;
  tr.done = kind;
  tr.steps = steps;
  return tr;
}

// ---- exploration occupancy ----

// Cell-visit counts from rollouts that sample every decision from the given
// source (kPrior for the learned prior, kUniform for the uniform-skill
// control).  The environment resets to the task whenever an episode ends.
// Counts are per primitive step of the agent's occupied cell, row-major
// [height x width]; exactly total_env_steps are counted.
struct OccupancyResult {
  int height = 0;
  int width = 0;
  std::vector<std::int64_t> counts;  // row-major [height * width]
  double coverage = 0.0;  // fraction of free cells visited at least once
};

template <class S>
OccupancyResult occupancy_rollout(envs::MazeEnv& env, const SkillExecutor<S>& ex,
                                  const PriorHandle<S>& prior,
                                  SkillSource source, double uniform_range,
                                  std::int64_t total_env_steps, Rng& rng,
                                  Agent<S>* agent = nullptr) {
  const envs::MazeLayout& layout = env.layout();
  OccupancyResult out;
  out.height = layout.height;
  out.width = layout.width;
  out.counts.assign(std::size_t(layout.height) * std::size_t(layout.width), 0);
  std::int64_t counted = 0;
  while (counted < total_env_steps) {
    if (env.done()) env.reset(env.start_cell(), env.goal_cell());
    const std::vector<float> obs = env.observe().features;
    std::vector<S> z;
    if (source == SkillSource::kUniform) {
      z = sample_uniform_latent(ex, uniform_range, rng);
    } else {
      z = sample_latent(agent, ex, prior, source, obs, uniform_range, rng);
    }
    const std::vector<float> actions = ex.expand(z);
    const int h = ex.horizon();
    for (int t = 0; t < h && counted < total_env_steps; ++t) {
      const auto res = env.step(actions[std::size_t(2 * t)],
                                actions[std::size_t(2 * t + 1)]);
      const envs::Cell c =
          envs::cell_of(layout, env.state().x, env.state().y);
      out.counts[std::size_t(c.row) * std::size_t(layout.width) +
                 std::size_t(c.col)] += 1;
      ++counted;
      if (res.done) break;
    }
  }
  std::int64_t free_cells = 0, visited = 0;
  for (int r = 0; r < layout.height; ++r) {
    for (int c = 0; c < layout.width; ++c) {
      if (layout.wall(r, c)) continue;
      ++free_cells;
      if (out.counts[std::size_t(r) * std::size_t(layout.width) +
                     std::size_t(c)] > 0)
        ++visited;
    }
  }
  out.coverage = free_cells > 0 ? double(visited) / double(free_cells) : 0.0;
  return out;
}

}  // namespace sprl::rl
