#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/dataset.h"
#include "sprl/dataset/sampling.h"
#include "sprl/skillmodel/model.h"

namespace sprl::skillmodel {

// Per-segment KL below this at final validation means the posterior has
// collapsed onto the unit prior and the latent carries no information.
inline constexpr double kCollapseThresholdNats = 0.1;

struct SkillTrainResult {
  LossBreakdown first_val;  // validation loss before the first update
  LossBreakdown final_val;  // validation loss after the last update
  bool collapsed = false;   // final regularization KL fell below threshold
  long long steps_run = 0;
};

// Splits off the trailing `val_fraction` of trajectories (at least one) as a
// held-out set. The split is by trajectory, not by segment, so no validation
// state ever appears in a training batch.
inline std::pair<dataset::Dataset, dataset::Dataset> split_train_val(
    const dataset::Dataset& data, double val_fraction = 0.1) {
  const std::size_t n = data.trajectories.size();
  if (n < 2)
    throw UsageError("skill training needs at least 2 trajectories to hold out "
                     "a validation set");
  if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
    throw UsageError("val_fraction must lie in (0, 1)");
  std::size_t n_val = std::size_t(double(n) * val_fraction);
  if (n_val < 1) n_val = 1;
  if (n_val >= n) n_val = n - 1;
  dataset::Dataset train{data.meta, {}};
  dataset::Dataset val{data.meta, {}};
  train.trajectories.assign(data.trajectories.begin(),
                            data.trajectories.end() - long(n_val));
  val.trajectories.assign(data.trajectories.end() - long(n_val),
                          data.trajectories.end());
  return {std::move(train), std::move(val)};
}

namespace detail {

inline void write_csv_row(std::ofstream& out, long long step, const LossBreakdown& b) {
  out << step << ',' << b.reconstruction << ',' << b.regularization_kl << ','
      << b.prior_kl << ',' << b.total << '\n';
}

inline std::string describe(const LossBreakdown& b) {
  std::ostringstream os;
  os << "reconstruction=" << b.reconstruction
     << " regularization_kl=" << b.regularization_kl
     << " prior_kl=" << b.prior_kl << " total=" << b.total;
  return os.str();
}

inline bool finite(const LossBreakdown& b) {
  return std::isfinite(b.reconstruction) && std::isfinite(b.regularization_kl) &&
         std::isfinite(b.prior_kl) && std::isfinite(b.total);
}

}  // namespace detail

namespace detail {

// Architecture and loss knobs that must agree between a checkpoint's stored
// config and the config of the run resuming from it.
inline void check_resume_compatible(const SkillModelConfig& stored,
                                    const SkillModelConfig& cfg) {
  const bool ok = stored.horizon == cfg.horizon && stored.z_dim == cfg.z_dim &&
                  stored.beta == cfg.beta && stored.obs_dim == cfg.obs_dim &&
                  stored.action_dim == cfg.action_dim &&
                  stored.action_scale == cfg.action_scale &&
                  stored.encoder_hidden == cfg.encoder_hidden &&
                  stored.decoder_hidden == cfg.decoder_hidden &&
                  stored.prior_layers == cfg.prior_layers &&
                  stored.prior_hidden == cfg.prior_hidden;
  if (!ok)
    throw UsageError("resume checkpoint was trained with a different skill "
                     "model architecture than the requested config");
}

}  // namespace detail

// Trains the skill autoencoder and its state-conditioned prior on expert
// segments. Writes `<out_prefix>.metrics.csv` (one row per update) and
// `<out_prefix>.val.csv` (one row per validation pass), then saves the model
// as `<out_prefix>.ckpt` + `<out_prefix>.json`. Deterministic for a fixed
// (dataset, config, seed).
//
// If `resume_from` names an earlier checkpoint prefix, training continues from
// its stored optimizer step up to `cfg.train_steps` total steps. Batch and
// noise randomness is derived per step from (seed, step), so a resumed run
// reproduces the straight-through run bit for bit. On divergence the current
// parameters are dumped under `<out_prefix>.abort` before the error is thrown.
template <class S = float>
SkillTrainResult train_skill_model(const dataset::Dataset& data,
                                   const SkillModelConfig& cfg,
                                   const std::string& out_prefix,
                                   std::uint64_t seed,
                                   std::ostream* log = nullptr,
                                   const std::string& resume_from = "") {
  cfg.validate();
  if (data.meta.obs_dim != cfg.obs_dim || data.meta.action_dim != cfg.action_dim)
    throw UsageError("skill training: dataset dimensions do not match config");

  const auto [train_ds, val_ds] = split_train_val(data);
  dataset::SegmentSampler train_sampler(train_ds, cfg.horizon);
  dataset::SegmentSampler val_sampler(val_ds, cfg.horizon);

  SkillModel<S> model(cfg, seed);
  long long start_step = 0;
  if (!resume_from.empty()) {
    SkillModel<S> loaded = load_skill_model<S>(resume_from);
    detail::check_resume_compatible(loaded.cfg, cfg);
    loaded.cfg = cfg;
    model = std::move(loaded);
    start_step = model.params.step_count();
    if (start_step >= cfg.train_steps)
      throw UsageError("resume checkpoint is already at step " +
                       std::to_string(start_step) + " >= train_steps " +
                       std::to_string(cfg.train_steps));
  }
  Rng val_rng = make_rng(seed, 3);

  // One fixed validation batch keeps the validation curve comparable across
  // steps; zero latent noise inside evaluate_skill_model keeps it exact.
  const int val_size =
      int(std::min<long long>(cfg.val_batch_size, val_sampler.total_segments()));
  const dataset::SegmentBatch val_batch = val_sampler.sample(val_size, val_rng);

  std::ofstream train_csv(out_prefix + ".metrics.csv", std::ios::trunc);
  std::ofstream val_csv(out_prefix + ".val.csv", std::ios::trunc);
  if (!train_csv || !val_csv)
    throw IoError("cannot open metric files under prefix " + out_prefix);
  train_csv << "step,reconstruction,regularization_kl,prior_kl,total\n";
  val_csv << "step,reconstruction,regularization_kl,prior_kl,total\n";
  train_csv << std::setprecision(10);
  val_csv << std::setprecision(10);

  SkillTrainResult result;
  result.first_val = evaluate_skill_model(model, val_batch);
  detail::write_csv_row(val_csv, start_step, result.first_val);

  for (long long step = start_step + 1; step <= cfg.train_steps; ++step) {
    Rng batch_rng = make_rng(seed, 1, std::uint64_t(step));
    Rng noise_rng = make_rng(seed, 2, std::uint64_t(step));
    const dataset::SegmentBatch batch = train_sampler.sample(cfg.batch_size, batch_rng);
    Tensor<S> noise(cfg.batch_size, cfg.z_dim);
    for (auto& x : noise.data) x = S(normal(noise_rng));

    Graph<S> g(true);
    const SkillLossNodes<S> nodes = skill_model_loss_nodes(g, model, batch, noise);
    const LossBreakdown train_loss = read_breakdown(g, nodes);
    if (!detail::finite(train_loss)) {
      save_skill_model(model, out_prefix + ".abort");
      throw NumericalError("skill training diverged at step " + std::to_string(step) +
                           ": " + detail::describe(train_loss) +
                           "; parameters dumped under " + out_prefix + ".abort");
    }
    model.params.zero_grad();
    g.backward(nodes.total);
    optimizer_step(model.params, cfg.optimizer);

    detail::write_csv_row(train_csv, step, train_loss);
    if (step % cfg.eval_every == 0 || step == cfg.train_steps) {
      const LossBreakdown val_loss = evaluate_skill_model(model, val_batch);
      detail::write_csv_row(val_csv, step, val_loss);
      val_csv.flush();
      result.final_val = val_loss;
      if (log)
        *log << "step " << step << "  train total " << train_loss.total
             << "  val " << detail::describe(val_loss) << '\n';
    }
    result.steps_run = step;
  }

  result.collapsed = result.final_val.regularization_kl < kCollapseThresholdNats;
  if (result.collapsed)
    std::cerr << "warning: skill latent collapsed (validation regularization KL "
              << result.final_val.regularization_kl << " < "
              << kCollapseThresholdNats
              << " nats); skills carry almost no information\n";

  save_skill_model(model, out_prefix);
  return result;
}

}  // namespace sprl::skillmodel
