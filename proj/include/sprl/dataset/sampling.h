#pragma once

// H-step segment sampling and dataset mixing.
//
// Segments are drawn uniformly over all (trajectory, start-index) pairs: a
// trajectory of length T contributes T - H + 1 valid starts, and a draw picks
// one global start index uniformly, so longer trajectories are weighted by
// their start count. Segments never cross trajectory boundaries. Trajectories
// shorter than H are skipped with a warning (padding would fabricate actions).

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/dataset.h"
#include "sprl/envs/trajectory.h"

namespace sprl::dataset {

// One training batch: the observation at each segment's first step plus the
// H actions that follow it.
struct SegmentBatch {
  int batch_size = 0;
  int obs_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  std::vector<float> states;       // batch_size x obs_dim
  std::vector<float> action_seqs;  // batch_size x (horizon * action_dim)
};

class SegmentSampler {
 public:
  SegmentSampler(const Dataset& ds, int horizon) : ds_(&ds), horizon_(horizon) {
    if (horizon < 1) throw UsageError("SegmentSampler: horizon must be >= 1");
    int skipped = 0;
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
      const int starts = ds.trajectories[i].length() - horizon + 1;
      if (starts <= 0) {
        ++skipped;
        continue;
      }
      traj_index_.push_back(int(i));
      cumulative_.push_back((cumulative_.empty() ? 0 : cumulative_.back()) + starts);
    }
    if (skipped > 0)
      std::cerr << "[dataset] warning: skipped " << skipped << " trajectories shorter than H="
                << horizon << "\n";
    if (cumulative_.empty())
      throw UsageError("SegmentSampler: no trajectory of length >= " + std::to_string(horizon));
  }

  long long total_segments() const { return cumulative_.back(); }
  int horizon() const { return horizon_; }

  SegmentBatch sample(int batch_size, Rng& rng) const {
    if (batch_size < 1) throw UsageError("SegmentSampler: batch_size must be >= 1");
    const int obs_dim = ds_->meta.obs_dim;
    const int action_dim = ds_->meta.action_dim;

    SegmentBatch batch;
    batch.batch_size = batch_size;
    batch.obs_dim = obs_dim;
    batch.action_dim = action_dim;
    batch.horizon = horizon_;
    batch.states.resize(std::size_t(batch_size) * std::size_t(obs_dim));
    batch.action_seqs.resize(std::size_t(batch_size) * std::size_t(horizon_) * std::size_t(action_dim));

    for (int b = 0; b < batch_size; ++b) {
      const long long pick = uniform_int(rng, 0LL, total_segments() - 1);
      const std::size_t slot = std::size_t(
          std::upper_bound(cumulative_.begin(), cumulative_.end(), pick) - cumulative_.begin());
      const long long before = slot == 0 ? 0 : cumulative_[slot - 1];
      const int start = int(pick - before);
      const envs::Trajectory& t = ds_->trajectories[std::size_t(traj_index_[slot])];

      std::copy_n(t.observation(start), obs_dim, batch.states.begin() + std::ptrdiff_t(b) * obs_dim);
      std::copy_n(t.action(start), std::size_t(horizon_) * std::size_t(action_dim),
                  batch.action_seqs.begin() + std::ptrdiff_t(b) * horizon_ * action_dim);
    }
    return batch;
  }

 private:
  const Dataset* ds_;
  int horizon_;
  std::vector<int> traj_index_;
  std::vector<long long> cumulative_;
};

inline SegmentBatch sample_segments(const Dataset& ds, int batch_size, int horizon, Rng& rng) {
  return SegmentSampler(ds, horizon).sample(batch_size, rng);
}

// Replaces floor(fraction_other * N) of the expert trajectories with
// trajectories from `other`, where N is the expert trajectory count; both
// subsets are drawn without replacement. fraction_other = 0 returns the
// expert dataset unchanged. Source tags ride along untouched.
inline Dataset mix_datasets(const Dataset& expert, const Dataset& other, double fraction_other,
                            Rng& rng) {
  if (fraction_other < 0.0 || fraction_other > 1.0)
    throw UsageError("mix_datasets: fraction_other must be in [0, 1]");
  if (fraction_other == 0.0) return expert;
  if (expert.meta.obs_dim != other.meta.obs_dim || expert.meta.action_dim != other.meta.action_dim)
    throw UsageError("mix_datasets: datasets disagree on tensor dims");

  const std::size_t n = expert.trajectories.size();
  const std::size_t n_other = std::size_t(fraction_other * double(n));
  const std::size_t n_expert = n - n_other;
  if (other.trajectories.size() < n_other)
    throw UsageError("mix_datasets: insufficient trajectories in the other dataset (" +
                     std::to_string(other.trajectories.size()) + " < " + std::to_string(n_other) + ")");

  std::vector<std::size_t> expert_idx(n);
  std::iota(expert_idx.begin(), expert_idx.end(), std::size_t(0));
  std::shuffle(expert_idx.begin(), expert_idx.end(), rng);
  std::vector<std::size_t> other_idx(other.trajectories.size());
  std::iota(other_idx.begin(), other_idx.end(), std::size_t(0));
  std::shuffle(other_idx.begin(), other_idx.end(), rng);

  Dataset out;
  out.meta = expert.meta;
  out.trajectories.reserve(n);
  for (std::size_t i = 0; i < n_expert; ++i)
    out.trajectories.push_back(expert.trajectories[expert_idx[i]]);
  for (std::size_t i = 0; i < n_other; ++i)
    out.trajectories.push_back(other.trajectories[other_idx[i]]);
  std::shuffle(out.trajectories.begin(), out.trajectories.end(), rng);
  return out;
}

}  // namespace sprl::dataset
