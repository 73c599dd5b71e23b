#pragma once

// One episode of experience: observations (T+1 rows) and actions (T rows)
// stored as flat row-major float arrays. Produced by rollouts, persisted and
// sampled by the dataset store. Rewards are deliberately absent — offline data
// is reward-free.

#include <cstdint>
#include <string>
#include <vector>

#include "sprl/common/errors.h"

namespace sprl::envs {

struct Trajectory {
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<float> observations;  // (length()+1) x obs_dim
  std::vector<float> actions;       // length() x action_dim
  bool reached_goal = false;
  std::uint64_t layout_seed = 0;
  std::string source_tag;  // "expert" | "random" | "bc"

  int length() const {
    return action_dim > 0 ? int(actions.size()) / action_dim : 0;
  }

  const float* observation(int t) const {
    return observations.data() + std::size_t(t) * std::size_t(obs_dim);
  }
  const float* action(int t) const {
    return actions.data() + std::size_t(t) * std::size_t(action_dim);
  }
};

inline void validate_trajectory(const Trajectory& t) {
  if (t.obs_dim <= 0 || t.action_dim <= 0)
    throw UsageError("Trajectory: obs_dim and action_dim must be positive");
  if (t.actions.size() % std::size_t(t.action_dim) != 0)
    throw UsageError("Trajectory: action array size not a multiple of action_dim");
  if (t.observations.size() != std::size_t(t.length() + 1) * std::size_t(t.obs_dim))
    throw UsageError("Trajectory: need exactly one more observation row than action rows");
  for (float v : t.observations)
    if (!std::isfinite(v)) throw UsageError("Trajectory: non-finite observation");
  for (float v : t.actions)
    if (!std::isfinite(v)) throw UsageError("Trajectory: non-finite action");
}

}  // namespace sprl::envs
