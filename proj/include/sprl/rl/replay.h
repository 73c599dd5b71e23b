// Replay storage for H-step decisions.
//
// A transition records one high-level decision: the observation at which a
// latent was chosen, the latent itself, the sum of rewards over the primitive
// steps it was executed for, the observation after execution, and how the
// window ended.  The buffer is a fixed-capacity FIFO ring with uniform
// sampling.
#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/envs/env.h"

namespace sprl::rl {

struct HStepTransition {
  std::vector<float> state;       // observation features at decision time
  std::vector<float> skill;       // executed latent
  float reward_sum = 0.0f;        // summed over the primitive steps actually run
  std::vector<float> next_state;  // observation features after the window
  envs::DoneKind done = envs::DoneKind::kNotDone;  // how the window ended
  int steps = 0;                  // primitive env steps actually executed
};

// Column-major-free flat batch: row i of `states` spans
// [i * obs_dim, (i + 1) * obs_dim), and likewise for the other arrays.
// `bootstrap_mask[i]` is 0 when the window ended the episode for real
// (kTerminal) and 1 otherwise; timeouts bootstrap.
struct TransitionBatch {
  int batch_size = 0;
  int obs_dim = 0;
  int latent_dim = 0;
  std::vector<float> states;
  std::vector<float> skills;
  std::vector<float> rewards;
  std::vector<float> next_states;
  std::vector<float> bootstrap_mask;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::int64_t capacity, int obs_dim, int latent_dim)
      : capacity_(capacity), obs_dim_(obs_dim), latent_dim_(latent_dim) {
    if (capacity <= 0) throw UsageError("replay capacity must be positive");
    if (obs_dim <= 0 || latent_dim <= 0) {
      throw UsageError("replay dimensions must be positive");
    }
    states_.reserve(std::size_t(std::min<std::int64_t>(capacity, 4096)) *
                    std::size_t(obs_dim));
  }

  std::int64_t capacity() const { return capacity_; }
  std::int64_t size() const { return size_; }
  int obs_dim() const { return obs_dim_; }
  int latent_dim() const { return latent_dim_; }

  // Appends one transition; once full, the oldest entry is overwritten.
  void add(const HStepTransition& tr) {
    if (int(tr.state.size()) != obs_dim_ ||
        int(tr.next_state.size()) != obs_dim_) {
      throw DimensionError("transition observation size mismatch");
    }
    if (int(tr.skill.size()) != latent_dim_) {
      throw DimensionError("transition latent size mismatch");
    }
    const std::size_t slot = std::size_t(head_);
    ensure_slot(slot);
    std::copy(tr.state.begin(), tr.state.end(),
              states_.begin() + slot * std::size_t(obs_dim_));
    std::copy(tr.skill.begin(), tr.skill.end(),
              skills_.begin() + slot * std::size_t(latent_dim_));
    std::copy(tr.next_state.begin(), tr.next_state.end(),
              next_states_.begin() + slot * std::size_t(obs_dim_));
    rewards_[slot] = tr.reward_sum;
    terminal_[slot] = (tr.done == envs::DoneKind::kTerminal) ? 1 : 0;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  // Uniform i.i.d. sample with replacement over the current contents.
  TransitionBatch sample(int batch_size, Rng& rng) const {
    if (batch_size <= 0) throw UsageError("batch size must be positive");
    if (size_ == 0) throw UsageError("cannot sample from an empty buffer");
    TransitionBatch b;
    b.batch_size = batch_size;
    b.obs_dim = obs_dim_;
    b.latent_dim = latent_dim_;
    b.states.resize(std::size_t(batch_size) * std::size_t(obs_dim_));
    b.skills.resize(std::size_t(batch_size) * std::size_t(latent_dim_));
    b.rewards.resize(std::size_t(batch_size));
    b.next_states.resize(std::size_t(batch_size) * std::size_t(obs_dim_));
    b.bootstrap_mask.resize(std::size_t(batch_size));
    for (int i = 0; i < batch_size; ++i) {
      const std::size_t slot =
          std::size_t(uniform_int(rng, 0, int(size_) - 1));
      std::copy_n(states_.begin() + slot * std::size_t(obs_dim_), obs_dim_,
                  b.states.begin() + std::size_t(i) * std::size_t(obs_dim_));
      std::copy_n(skills_.begin() + slot * std::size_t(latent_dim_),
                  latent_dim_,
                  b.skills.begin() + std::size_t(i) * std::size_t(latent_dim_));
      std::copy_n(next_states_.begin() + slot * std::size_t(obs_dim_), obs_dim_,
                  b.next_states.begin() +
                      std::size_t(i) * std::size_t(obs_dim_));
      b.rewards[i] = rewards_[slot];
      b.bootstrap_mask[i] = terminal_[slot] ? 0.0f : 1.0f;
    }
    return b;
  }

 private:
  void ensure_slot(std::size_t slot) {
    const std::size_t need = slot + 1;
    if (rewards_.size() >= need) return;
    states_.resize(need * std::size_t(obs_dim_));
    skills_.resize(need * std::size_t(latent_dim_));
    next_states_.resize(need * std::size_t(obs_dim_));
    rewards_.resize(need);
    terminal_.resize(need);
  }

  std::int64_t capacity_;
  int obs_dim_;
  int latent_dim_;
  std::int64_t head_ = 0;
  std::int64_t size_ = 0;
  std::vector<float> states_;
  std::vector<float> skills_;
  std::vector<float> next_states_;
  std::vector<float> rewards_;
  std::vector<std::uint8_t> terminal_;
};

}  // namespace sprl::rl
