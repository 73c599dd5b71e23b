// Training drivers: the full agent loop, deterministic evaluation, behavior
// cloning, and the flat action-prior trainer.
//
// All variants share one loop; they differ only in which executor expands a
// latent (skill decoder vs identity), which reference prior regularizes the
// policy (learned vs uniform), and how the policy is initialized (prior
// weights, cloned weights, or random).
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/dataset.h"
#include "sprl/dataset/sampling.h"
#include "sprl/envs/env.h"
#include "sprl/envs/maze.h"
#include "sprl/rl/agent.h"
#include "sprl/rl/replay.h"
#include "sprl/rl/rollout.h"
#include "sprl/skillmodel/model.h"

namespace sprl::rl {

// A fixed downstream task: one layout, one start, one goal, every episode.
struct TrainTask {
  envs::MazeLayout layout;
  envs::EnvConfig env_cfg;
  envs::Cell start{};
  envs::Cell goal{};
};

struct EvalResult {
  double success_rate = 0.0;  // fraction of episodes that ever touch the goal
  double mean_return = 0.0;   // mean summed reward
  double mean_length = 0.0;   // mean steps to first reward (t_max if never)
};

// Deterministic evaluation: every decision executes the squashed policy mean.
template <class S>
EvalResult evaluate_agent(Agent<S>& a, const SkillExecutor<S>& ex,
                          const TrainTask& task, int episodes) {
  if (episodes <= 0) throw UsageError("evaluate: episodes must be positive");
  envs::MazeEnv env(task.layout, task.env_cfg);
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    env.reset(task.start, task.goal);
    double ep_return = 0.0;
    int first_reward_step = -1;
    int steps = 0;
    while (!env.done()) {
      const std::vector<float> obs = env.observe().features;
      const std::vector<S> z = policy_act_mean(a, obs);
      const std::vector<float> actions = ex.expand(z);
      const int h = ex.horizon();
      for (int t = 0; t < h; ++t) {
        const auto res = env.step(actions[std::size_t(2 * t)],
                                  actions[std::size_t(2 * t + 1)]);
        ep_return += res.reward;
        ++steps;
        if (res.reward > 0.0 && first_reward_step < 0)
          first_reward_step = steps;
        if (res.done) break;
      }
    }
    out.success_rate += (first_reward_step >= 0) ? 1.0 : 0.0;
    out.mean_return += ep_return;
    out.mean_length +=
        (first_reward_step >= 0) ? double(first_reward_step)
                                 : double(task.env_cfg.t_max);
  }
  out.success_rate /= double(episodes);
  out.mean_return /= double(episodes);
  out.mean_length /= double(episodes);
  return out;
}

struct TrainAgentResult {
  std::int64_t env_steps = 0;
  std::int64_t decisions = 0;
  std::int64_t updates = 0;
  EvalResult final_eval;
  std::int64_t steps_to_half = -1;  // env steps at first eval success >= 0.5
  std::int64_t steps_to_high = -1;  // env steps at first eval success >= 0.8
  bool stopped_early = false;
  std::string checkpoint_prefix;
};

namespace detail {

inline void write_row(std::ofstream& out, std::initializer_list<double> vals) {
  bool first = true;
  out << std::setprecision(10);
  for (double v : vals) {
    if (!first) out << ",";
    out << v;
    first = false;
  }
  out << "\n";
}

template <class S>
Tensor<S> normal_tensor(int rows, int cols, Rng& rng) {
  Tensor<S> t(rows, cols, S(0));
  for (auto& v : t.data) v = S(normal(rng));
  return t;
}

}  // namespace detail

// Optional early stop: end training once `consecutive` successive evaluations
// reach at least `success`.  Disabled when success < 0.
struct StopRule {
  double success = -1.0;
  int consecutive = 2;
};

// Where the latent for decision number `decision` comes from.  Warmup draws
// from the learned prior when there is one (uniform otherwise); afterwards
// each decision is prior-sampled with probability omega(decision) and comes
// from the policy otherwise.
inline SkillSource decision_source(const RLConfig& cfg, std::int64_t decision,
                                   bool learned_prior, Rng& omega_rng) {
  if (decision < cfg.warmup_decisions)
    return learned_prior ? SkillSource::kPrior : SkillSource::kUniform;
  const double omega = omega_at(cfg.omega, decision);
  if (omega > 0.0 && uniform(omega_rng, 0.0, 1.0) < omega)
    return SkillSource::kPrior;
  return SkillSource::kPolicy;
}

// Trains one agent on one task.  `skill_model` supplies the decoder and/or
// learned prior for variants that need one (spirl, ssp_no_prior, flat_prior)
// and must stay alive for the duration; `bc_params` initializes the policy
// for bc_sac.  Writes <prefix>.train.csv (one row per finished episode),
// <prefix>.eval.csv (one row per evaluation), and <prefix>.final.* checkpoint
// files.  A non-finite loss anywhere aborts with a checkpoint dump at
// <prefix>.abort.*.
template <class S = float>
TrainAgentResult train_agent(const TrainTask& task,
                             skillmodel::SkillModel<S>* skill_model,
                             const RLConfig& cfg, std::uint64_t seed,
                             const std::string& out_prefix,
                             const ParamSet<S>* bc_params = nullptr,
                             const StopRule& stop = {},
                             std::ostream* log = nullptr) {
  cfg.validate();
  const int obs_dim = envs::observation_dim(task.env_cfg.patch_k);
  const int action_dim = 2;

  // ---- variant wiring ----
  SkillExecutor<S> ex;
  ex.action_dim = action_dim;
  PriorHandle<S> prior;
  int latent_dim = action_dim;
  if (uses_skill_space(cfg.variant)) {
    if (skill_model == nullptr)
      throw UsageError("train: this variant requires a skill model");
    if (skill_model->cfg.horizon != cfg.horizon)
      throw UsageError("train: config horizon disagrees with the skill model");
    if (skill_model->cfg.obs_dim != obs_dim)
      throw UsageError("train: skill model observation size mismatch");
    ex.decoder = skill_model;
    latent_dim = skill_model->cfg.z_dim;
  } else {
    if (cfg.horizon != 1)
      throw UsageError("train: flat variants require horizon == 1");
    if (cfg.variant == Variant::kFlatPrior) {
      if (skill_model == nullptr)
        throw UsageError("train: flat_prior requires a trained action prior");
      if (skill_model->cfg.horizon != 1 ||
          skill_model->cfg.z_dim != action_dim)
        throw UsageError("train: flat prior must have horizon 1 and "
                         "latent size equal to the action size");
      if (skill_model->cfg.obs_dim != obs_dim)
        throw UsageError("train: flat prior observation size mismatch");
    }
  }
  if (uses_learned_prior(cfg.variant)) prior.model = skill_model;
  if (cfg.omega.initial > 0.0 && prior.model == nullptr)
    throw UsageError("train: omega mixing requires a learned prior");

  Agent<S> a(cfg, obs_dim, latent_dim, seed);
  if (uses_learned_prior(cfg.variant) && cfg.prior_init)
    init_policy_from_prior(a, *skill_model);
  if (cfg.variant == Variant::kBcSac) {
    if (bc_params == nullptr)
      throw UsageError("train: bc_sac requires cloned policy parameters");
    init_policy_from_params(a, *bc_params);
  }

  ReplayBuffer buf(cfg.buffer_capacity, obs_dim, latent_dim);
  envs::MazeEnv env(task.layout, task.env_cfg);
  env.reset(task.start, task.goal);

  Rng rollout_rng = make_rng(seed, 20);
  Rng target_noise_rng = make_rng(seed, 21);
  Rng policy_noise_rng = make_rng(seed, 22);
  Rng batch_rng = make_rng(seed, 23);
  Rng omega_rng = make_rng(seed, 24);

  std::ofstream train_csv(out_prefix + ".train.csv");
  std::ofstream eval_csv(out_prefix + ".eval.csv");
  if (!train_csv || !eval_csv)
    throw IoError("train: cannot write metric logs at " + out_prefix);
  train_csv << "env_steps,decisions,episode_return,success,mean_kl,alpha,"
               "q_loss,pi_loss\n";
  eval_csv << "env_steps,decisions,success_rate,mean_return,mean_length\n";

  TrainAgentResult result;
  result.checkpoint_prefix = out_prefix + ".final";
  double ep_return = 0.0;
  bool ep_success = false;
  double sum_kl = 0.0, sum_alpha = 0.0, sum_q = 0.0, sum_pi = 0.0;
  std::int64_t stat_updates = 0;
  double last_kl = 0.0, last_alpha = a.alpha(), last_q = 0.0, last_pi = 0.0;
  int stop_hits = 0;

  auto run_update = [&]() {
    const TransitionBatch batch = buf.sample(cfg.batch_size, batch_rng);
    const Tensor<S> tgt_noise =
        detail::normal_tensor<S>(cfg.batch_size, latent_dim, target_noise_rng);
    const std::vector<S> targets = q_target_values(a, batch, prior, tgt_noise);
    const double q_loss = critic_update(a, batch, targets);
    const Tensor<S> pi_noise =
        detail::normal_tensor<S>(cfg.batch_size, latent_dim, policy_noise_rng);
    const PolicyUpdateStats ps = policy_update(a, batch, prior, pi_noise);
    const double alpha = alpha_update(a, ps.mean_div);
    target_sync(a);
    ++a.updates;
    ++result.updates;
    sum_kl += ps.mean_div;
    sum_alpha += alpha;
    sum_q += q_loss;
    sum_pi += ps.loss;
    ++stat_updates;
  };

  while (result.env_steps < cfg.train_env_steps) {
    // ---- one decision ----
    const SkillSource source =
        decision_source(cfg, result.decisions,
                        uses_learned_prior(cfg.variant), omega_rng);
    const std::vector<float> obs = env.observe().features;
    const std::vector<S> z = sample_latent(&a, ex, prior, source, obs,
                                           cfg.action_range, rollout_rng);
    HStepTransition tr;
    try {
      tr = hier_step(env, z, ex);
    } catch (const NumericalError& e) {
      save_agent(a, out_prefix + ".abort");
      throw NumericalError(std::string(e.what()) +
                           "; checkpoint dumped to " + out_prefix + ".abort");
    }
    buf.add(tr);
    result.env_steps += tr.steps;
    ++result.decisions;
    ep_return += double(tr.reward_sum);
    ep_success = ep_success || tr.reward_sum > 0.0f;

    // ---- updates ----
    const bool past_warmup = result.decisions > cfg.warmup_decisions &&
                             buf.size() >= cfg.batch_size;
    const bool due = cfg.horizon > 1 ||
                     (result.decisions % cfg.flat_update_every == 0);
    if (past_warmup && due) {
      try {
        run_update();
      } catch (const NumericalError& e) {
        save_agent(a, out_prefix + ".abort");
        throw NumericalError(std::string(e.what()) +
                             "; checkpoint dumped to " + out_prefix +
                             ".abort");
      }
    }

    // ---- episode bookkeeping ----
    if (env.done()) {
      if (stat_updates > 0) {
        last_kl = sum_kl / double(stat_updates);
        last_alpha = sum_alpha / double(stat_updates);
        last_q = sum_q / double(stat_updates);
        last_pi = sum_pi / double(stat_updates);
        sum_kl = sum_alpha = sum_q = sum_pi = 0.0;
        stat_updates = 0;
      }
      detail::write_row(train_csv,
                        {double(result.env_steps), double(result.decisions),
                         ep_return, ep_success ? 1.0 : 0.0, last_kl,
                         last_alpha, last_q, last_pi});
      ep_return = 0.0;
      ep_success = false;
      env.reset(task.start, task.goal);
    }

    // ---- periodic evaluation ----
    if (result.decisions % cfg.eval_every_decisions == 0) {
      const EvalResult er = evaluate_agent(a, ex, task, cfg.eval_episodes);
      detail::write_row(eval_csv,
                        {double(result.env_steps), double(result.decisions),
                         er.success_rate, er.mean_return, er.mean_length});
      if (log) {
        *log << "steps " << result.env_steps << " decisions "
             << result.decisions << " eval success " << er.success_rate
             << " alpha " << last_alpha << "\n";
      }
      if (er.success_rate >= 0.5 && result.steps_to_half < 0)
        result.steps_to_half = result.env_steps;
      if (er.success_rate >= 0.8 && result.steps_to_high < 0)
        result.steps_to_high = result.env_steps;
      if (stop.success >= 0.0) {
        stop_hits = (er.success_rate >= stop.success) ? stop_hits + 1 : 0;
        if (stop_hits >= stop.consecutive) {
          result.stopped_early = true;
          break;
        }
      }
    }
  }

  save_agent(a, result.checkpoint_prefix);
  result.final_eval = evaluate_agent(a, ex, task, cfg.eval_episodes);
  detail::write_row(eval_csv,
                    {double(result.env_steps), double(result.decisions),
                     result.final_eval.success_rate,
                     result.final_eval.mean_return,
                     result.final_eval.mean_length});
  return result;
}

// ---- behavior cloning ----

struct BcConfig {
  int net_layers = 4;
  int net_hidden = 64;
  double action_range = 0.05;  // squash bound in raw action units
  int batch_size = 256;
  std::int64_t train_steps = 20000;
  double learning_rate = 3e-4;

  void validate() const {
    if (net_layers <= 0 || net_hidden <= 0)
      throw UsageError("bc: network shape must be positive");
    if (action_range <= 0.0) throw UsageError("bc: range must be positive");
    if (batch_size <= 0 || train_steps <= 0)
      throw UsageError("bc: batch and steps must be positive");
    if (learning_rate <= 0.0)
      throw UsageError("bc: learning rate must be positive");
  }
};

struct BcResult {
  ParamSet<float> params;  // named to drop into an agent's policy set
  double first_mse = 0.0;
  double final_mse = 0.0;
};

// Supervised regression of the squashed policy mean onto dataset actions:
// L = mean || range * tanh(mean_pre(s)) - a ||^2 (elementwise mean).  The
// network is the same shape as the agent's policy so the weights transfer
// verbatim; the log_std head is untouched by this loss and keeps its
// initialization.
inline BcResult bc_pretrain(const dataset::Dataset& ds, const BcConfig& bc,
                            std::uint64_t seed, std::ostream* log = nullptr) {
  bc.validate();
  const int obs_dim = ds.meta.obs_dim;
  const int action_dim = ds.meta.action_dim;
  Mlp<float> net("policy",
                 MlpConfig{detail::trunk_sizes(obs_dim, bc.net_layers,
                                               bc.net_hidden,
                                               2 * action_dim)});
  BcResult out;
  {
    Rng r = make_rng(seed, 30);
    net.init(out.params, r);
  }
  dataset::SegmentSampler sampler(ds, 1);
  Rng batch_rng = make_rng(seed, 31);
  OptimizerConfig opt;
  opt.kind = OptimizerKind::kAdam;
  opt.learning_rate = bc.learning_rate;
  for (std::int64_t step = 0; step < bc.train_steps; ++step) {
    const dataset::SegmentBatch batch = sampler.sample(bc.batch_size,
                                                       batch_rng);
    Graph<float> g(true);
    const int s = g.input(skillmodel::scaled_observations<float>(
        batch.states.data(), bc.batch_size, obs_dim));
    const int head = net.forward(g, out.params, s);
    const int mean_pre = g.slice_cols(head, 0, action_dim);
    const int pred = g.scale(g.tanh_(mean_pre), float(bc.action_range));
    const int target = g.input(skillmodel::tensor_from_flat<float>(
        batch.action_seqs, bc.batch_size, action_dim));
    const int loss = g.mean_all(g.square(g.sub(pred, target)));
    const double value = double(g.scalar(loss));
    if (!std::isfinite(value))
      throw NumericalError("behavior cloning diverged at step " +
                           std::to_string(step));
    if (step == 0) out.first_mse = value;
    out.final_mse = value;
    out.params.zero_grad();
    g.backward(loss);
    optimizer_step(out.params, opt);
    if (log && step % 1000 == 0)
      *log << "bc step " << step << " mse " << value << "\n";
  }
  return out;
}

// ---- flat action prior ----

// Maps raw actions into the pre-squash space the policy's Gaussian lives in:
// v = atanh(a / range), clamped just inside the boundary so saturated
// (clipped) dataset actions stay finite.
inline double presquash_action(double a, double range) {
  const double eps = 1e-3;
  double u = a / range;
  if (u > 1.0 - eps) u = 1.0 - eps;
  if (u < -1.0 + eps) u = -1.0 + eps;
  return std::atanh(u);
}

struct FlatPriorResult {
  double first_nll = 0.0;
  double final_nll = 0.0;
  std::int64_t steps_run = 0;
};

// Trains the degenerate horizon-1 "skill" model: the latent IS the action
// (identity encoder/decoder), so the only thing to learn is the prior
// p(a|s), fit by Gaussian negative log-likelihood on single-step (state,
// action) pairs in pre-squash space.  Saved with the regular skill-model
// checkpoint format so downstream loading is uniform.  cfg must have
// horizon == 1 and z_dim == action_dim.
inline FlatPriorResult flat_prior_train(const dataset::Dataset& ds,
                                        skillmodel::SkillModelConfig cfg,
                                        double action_range,
                                        const std::string& out_prefix,
                                        std::uint64_t seed,
                                        std::ostream* log = nullptr) {
  cfg.validate();
  if (cfg.horizon != 1 || cfg.z_dim != cfg.action_dim)
    throw UsageError("flat prior: requires horizon 1 and z_dim == action_dim");
  if (ds.meta.obs_dim != cfg.obs_dim || ds.meta.action_dim != cfg.action_dim)
    throw UsageError("flat prior: dataset dimensions disagree with config");
  if (action_range <= 0.0)
    throw UsageError("flat prior: action range must be positive");
  skillmodel::SkillModel<float> m(cfg, seed);
  dataset::SegmentSampler sampler(ds, 1);
  Rng batch_rng = make_rng(seed, 40);
  std::ofstream csv(out_prefix + ".metrics.csv");
  if (!csv) throw IoError("flat prior: cannot write " + out_prefix +
                          ".metrics.csv");
  csv << "step,prior_nll\n";
  FlatPriorResult out;
  const int d = cfg.action_dim;
  for (std::int64_t step = 0; step < cfg.train_steps; ++step) {
    const dataset::SegmentBatch batch = sampler.sample(cfg.batch_size,
                                                       batch_rng);
    Tensor<float> v(cfg.batch_size, d, 0.0f);
    for (int i = 0; i < cfg.batch_size; ++i)
      for (int k = 0; k < d; ++k)
        v.at(i, k) = float(presquash_action(
            double(batch.action_seqs[std::size_t(i) * std::size_t(d) +
                                     std::size_t(k)]),
            action_range));
    Graph<float> g(true);
    const int s = g.input(skillmodel::scaled_observations<float>(
        batch.states.data(), cfg.batch_size, cfg.obs_dim));
    GaussianNodes<float> p = skillmodel::prior_skill_nodes(g, m, s);
    const int vn = g.input(std::move(v));
    // NLL per row: sum_d [ log_std + 0.5*log(2 pi) + 0.5*((v-mu)/sigma)^2 ]
    const int zscore = g.mul(g.sub(vn, p.mean), g.exp_(g.scale(p.log_std,
                                                               -1.0f)));
    const int per_dim = g.add(p.log_std, g.scale(g.square(zscore), 0.5f));
    const int nll =
        g.mean_all(g.add_scalar(g.row_sum(per_dim),
                                float(0.5 * kLogTwoPi * d)));
    const double value = double(g.scalar(nll));
    if (!std::isfinite(value))
      throw NumericalError("flat prior training diverged at step " +
                           std::to_string(step));
    if (step == 0) out.first_nll = value;
    out.final_nll = value;
    csv << step << "," << std::setprecision(10) << value << "\n";
    m.params.zero_grad();
    g.backward(nll);
    optimizer_step(m.params, cfg.optimizer);
    out.steps_run = step + 1;
    if (log && step % 1000 == 0)
      *log << "flat prior step " << step << " nll " << value << "\n";
  }
  skillmodel::save_skill_model(m, out_prefix);
  return out;
}

}  // namespace sprl::rl
