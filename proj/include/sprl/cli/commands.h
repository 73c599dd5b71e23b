// Command implementations behind the `sprl` binary.
//
// Each command takes a fully merged RunConfig (defaults < config file <
// flags), finishes resolving any variant-dependent settings, echoes the
// resolved document into the run directory, and then runs. run_cli() is the
// whole program: parse, merge, dispatch, map exceptions to exit codes
// (0 success, 1 usage, 2 runtime).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sprl/cli/config.h"
#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/dataset.h"
#include "sprl/envs/env.h"
#include "sprl/envs/maze.h"
#include "sprl/envs/rollouts.h"
#include "sprl/rl/agent.h"
#include "sprl/rl/rollout.h"
#include "sprl/rl/train.h"
#include "sprl/skillmodel/model.h"
#include "sprl/skillmodel/train.h"

namespace sprl::cli {

namespace detail {

// Builds the downstream task: generated layout plus optional start/goal cell
// overrides from the task section (-1 keeps the layout's own cells).
inline rl::TrainTask make_task(const RunConfig& rc) {
  rl::TrainTask task;
  task.layout = envs::generate_maze(rc.maze_seed, rc.maze_width, rc.maze_height,
                                    rc.door_density);
  task.env_cfg = rc.env;
  task.env_cfg.validate();
  task.start = task.layout.start_cell;
  task.goal = task.layout.goal_cell;
  auto override_cell = [&](const char* what, int row, int col, envs::Cell& dst) {
    if (row < 0 && col < 0) return;
    if (row < 0 || col < 0)
      throw UsageError(std::string("task: ") + what +
                       " needs both row and col (or neither)");
    if (!task.layout.in_bounds(row, col) || task.layout.wall(row, col))
      throw UsageError(std::string("task: ") + what + " cell (" +
                       std::to_string(row) + ", " + std::to_string(col) +
                       ") is not a free cell of the layout");
    dst = envs::Cell{row, col};
  };
  override_cell("start", rc.start_row, rc.start_col, task.start);
  override_cell("goal", rc.goal_row, rc.goal_col, task.goal);
  return task;
}

inline void check_skill_model_matches_agent(
    const skillmodel::SkillModelConfig& sc, const rl::Agent<float>& a) {
  if (sc.horizon != a.cfg.horizon)
    throw UsageError("skill checkpoint horizon " + std::to_string(sc.horizon) +
                     " disagrees with the agent's horizon " +
                     std::to_string(a.cfg.horizon));
  if (sc.z_dim != a.latent_dim)
    throw UsageError("skill checkpoint z_dim " + std::to_string(sc.z_dim) +
                     " disagrees with the agent's latent size " +
                     std::to_string(a.latent_dim));
  if (sc.obs_dim != a.obs_dim)
    throw UsageError("skill checkpoint obs_dim " + std::to_string(sc.obs_dim) +
                     " disagrees with the agent's observation size " +
                     std::to_string(a.obs_dim));
}

}  // namespace detail

// ---- collect ----------------------------------------------------------

// Rolls out N trajectories (expert planner-followers, optionally mixed with
// uniform-random ones) on freshly seeded layouts and writes one dataset file.
inline int cmd_collect(const RunConfig& rc) {
  if (rc.collect_num < 1)
    throw UsageError("collect: num must be >= 1");
  if (!(rc.mix_random >= 0.0 && rc.mix_random <= 1.0))
    throw UsageError("collect: mix_random must lie in [0, 1]");
  envs::EnvConfig ec = rc.env;
  ec.t_max = rc.collect_t_max;
  ec.validate();

  echo_config(rc, "collect");
  const std::string out_path = resolve_path(rc, rc.dataset_path);

  dataset::Dataset ds;
  ds.meta.obs_dim = envs::observation_dim(ec.patch_k);
  ds.meta.action_dim = 2;
  ds.meta.maze_width = rc.maze_width;
  ds.meta.maze_height = rc.maze_height;
  ds.meta.door_density = rc.door_density;
  ds.meta.env = ec;

  const std::int64_t n_random =
      std::llround(rc.mix_random * double(rc.collect_num));
  Rng layout_rng = make_rng(rc.seed, 50);
  std::int64_t total_steps = 0, reached = 0;
  for (std::int64_t i = 0; i < rc.collect_num; ++i) {
    const std::uint64_t layout_seed = layout_rng();
    envs::MazeLayout layout = envs::generate_maze(
        layout_seed, rc.maze_width, rc.maze_height, rc.door_density);
    envs::MazeEnv env(std::move(layout), ec);
    Rng roll_rng = make_rng(rc.seed, 51, std::uint64_t(i));
    envs::Trajectory traj = i < n_random
                                ? envs::random_rollout(env, roll_rng)
                                : envs::expert_rollout(env, rc.expert, roll_rng);
    total_steps += traj.length();
    reached += traj.reached_goal ? 1 : 0;
    ds.trajectories.push_back(std::move(traj));
  }

  dataset::write_dataset(ds, out_path);
  std::cout << "collected " << rc.collect_num << " trajectories ("
            << (rc.collect_num - n_random) << " expert, " << n_random
            << " random), " << total_steps << " env steps, " << reached << "/"
            << rc.collect_num << " reached the goal\n"
            << "dataset: " << out_path << "\n";
  return 0;
}

// ---- train-skills -----------------------------------------------------

// Trains the skill model (autoencoder + state-conditioned prior) on a
// dataset. horizon == 1 trains the degenerate flat action prior instead:
// there is no sequence to embed, so only p(a|s) is fit.
inline int cmd_train_skills(RunConfig rc) {
  const std::string ds_path = resolve_path(rc, rc.dataset_path);
  const std::string out_prefix = resolve_path(rc, rc.skill_prefix);

  const dataset::Dataset ds = dataset::read_dataset(ds_path);
  // The dataset is the authority on dimensions; the flat prior's latent IS
  // the action. Resolved before the echo so the echo shows what ran.
  rc.skill.obs_dim = ds.meta.obs_dim;
  rc.skill.action_dim = ds.meta.action_dim;
  if (rc.skill.horizon == 1) rc.skill.z_dim = rc.skill.action_dim;
  echo_config(rc, "train-skills");
  const skillmodel::SkillModelConfig& sc = rc.skill;

  if (sc.horizon == 1) {
    if (!rc.resume_from.empty())
      throw UsageError("train-skills: --resume-from is only supported for "
                       "horizon > 1 skill training");
    const rl::FlatPriorResult r = rl::flat_prior_train(
        ds, sc, ds.meta.env.a_max, out_prefix, rc.seed, &std::cout);
    std::cout << "flat action prior: nll " << r.first_nll << " -> "
              << r.final_nll << " over " << r.steps_run << " steps\n"
              << "checkpoint: " << out_prefix << ".ckpt\n";
    return 0;
  }

  const std::string resume =
      rc.resume_from.empty() ? std::string() : resolve_path(rc, rc.resume_from);
  const skillmodel::SkillTrainResult r = skillmodel::train_skill_model<float>(
      ds, sc, out_prefix, rc.seed, &std::cout, resume);
  std::cout << "skill model: validation total " << r.first_val.total << " -> "
            << r.final_val.total << " at step " << r.steps_run
            << (r.collapsed ? " (latent COLLAPSED)" : "") << "\n"
            << "checkpoint: " << out_prefix << ".ckpt\n";
  return 0;
}

// ---- train-rl ---------------------------------------------------------

// Trains one agent variant on the downstream task. Flat variants (sac,
// bc_sac, flat_prior) act directly in the primitive action box, so their
// horizon is forced to 1 and the policy squash bound to a_max; skill-space
// variants keep the configured latent horizon/range.
inline int cmd_train_rl(RunConfig rc) {
  if (!rl::uses_skill_space(rc.rl.variant)) {
    rc.rl.horizon = 1;
    rc.rl.action_range = rc.env.a_max;
  }
  echo_config(rc, "train-rl");
  const rl::TrainTask task = detail::make_task(rc);

  std::unique_ptr<skillmodel::SkillModel<float>> sm;
  if (rl::uses_skill_space(rc.rl.variant) ||
      rl::uses_learned_prior(rc.rl.variant)) {
    const std::string prefix = resolve_path(rc, rc.skill_prefix);
    sm = std::make_unique<skillmodel::SkillModel<float>>(
        skillmodel::load_skill_model<float>(prefix));
    std::cout << "loaded skill checkpoint " << prefix << " (horizon "
              << sm->cfg.horizon << ", z_dim " << sm->cfg.z_dim << ")\n";
  }

  std::unique_ptr<ParamSet<float>> bc_params;
  if (rc.rl.variant == rl::Variant::kBcSac) {
    const std::string ds_path = resolve_path(rc, rc.dataset_path);
    const dataset::Dataset ds = dataset::read_dataset(ds_path);
    rl::BcConfig bc;
    bc.net_layers = rc.rl.net_layers;
    bc.net_hidden = rc.rl.net_hidden;
    bc.action_range = rc.env.a_max;
    bc.batch_size = rc.bc_batch_size;
    bc.train_steps = rc.bc_train_steps;
    bc.learning_rate = rc.bc_learning_rate;
    rl::BcResult br = rl::bc_pretrain(ds, bc, rc.seed, &std::cout);
    std::cout << "bc pretraining: mse " << br.first_mse << " -> "
              << br.final_mse << "\n";
    bc_params = std::make_unique<ParamSet<float>>(std::move(br.params));
  }

  rl::StopRule stop;
  stop.success = rc.stop_success;
  stop.consecutive = rc.stop_consecutive;
  const std::string out_prefix = resolve_path(rc, rc.agent_prefix);
  const rl::TrainAgentResult r =
      rl::train_agent<float>(task, sm.get(), rc.rl, rc.seed, out_prefix,
                             bc_params.get(), stop, &std::cout);
  std::cout << "trained " << rl::variant_name(rc.rl.variant) << ": "
            << r.env_steps << " env steps, " << r.decisions << " decisions, "
            << r.updates << " updates"
            << (r.stopped_early ? " (stopped early)" : "") << "\n"
            << "final eval: success " << r.final_eval.success_rate
            << ", return " << r.final_eval.mean_return << ", length "
            << r.final_eval.mean_length << "\n"
            << "checkpoint: " << r.checkpoint_prefix << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------

// Deterministic evaluation of a trained agent on the downstream task;
// metrics go to a JSON file.
inline int cmd_eval(const RunConfig& rc) {
  echo_config(rc, "eval");
  const std::string ckpt =
      rc.agent_checkpoint.empty()
          ? resolve_path(rc, rc.agent_prefix) + ".final"
          : resolve_path(rc, rc.agent_checkpoint);
  rl::Agent<float> agent = rl::load_agent<float>(ckpt);

  std::unique_ptr<skillmodel::SkillModel<float>> sm;
  rl::SkillExecutor<float> ex;
  ex.action_dim = 2;
  if (rl::uses_skill_space(agent.cfg.variant)) {
    sm = std::make_unique<skillmodel::SkillModel<float>>(
        skillmodel::load_skill_model<float>(resolve_path(rc, rc.skill_prefix)));
    detail::check_skill_model_matches_agent(sm->cfg, agent);
    ex.decoder = sm.get();
  }

  const rl::TrainTask task = detail::make_task(rc);
  if (envs::observation_dim(task.env_cfg.patch_k) != agent.obs_dim)
    throw UsageError("eval: task observation size disagrees with the agent");

  const rl::EvalResult r =
      rl::evaluate_agent(agent, ex, task, rc.eval_episodes);
  const nlohmann::json j{{"episodes", rc.eval_episodes},
                         {"success_rate", r.success_rate},
                         {"mean_return", r.mean_return},
                         {"mean_length", r.mean_length},
                         {"variant", rl::variant_name(agent.cfg.variant)},
                         {"checkpoint", ckpt}};
  const std::string out_path = resolve_path(rc, rc.metrics_path);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_path);
  out << j.dump(2) << "\n";
  if (!out.flush()) throw IoError("failed writing " + out_path);
  std::cout << "eval over " << rc.eval_episodes << " episodes: success "
            << r.success_rate << ", return " << r.mean_return << ", length "
            << r.mean_length << "\n"
            << "metrics: " << out_path << "\n";
  return 0;
}

// ---- plot-exploration -------------------------------------------------

// Rolls exploration trajectories (policy, prior-sampled, or uniform latents)
// and exports the per-cell visit histogram as CSV plus a max-normalized
// P2 portable graymap, printing the free-cell coverage fraction.
inline int cmd_plot_exploration(const RunConfig& rc) {
  rl::SkillSource source;
  if (rc.explore_source == "policy") source = rl::SkillSource::kPolicy;
  else if (rc.explore_source == "prior") source = rl::SkillSource::kPrior;
  else if (rc.explore_source == "uniform") source = rl::SkillSource::kUniform;
  else
    throw UsageError("plot-exploration: source must be policy, prior, or "
                     "uniform (got '" + rc.explore_source + "')");
  if (rc.explore_steps < 1)
    throw UsageError("plot-exploration: steps must be >= 1");

  echo_config(rc, "plot-exploration");
  const rl::TrainTask task = detail::make_task(rc);

  // The skill checkpoint is required wherever a prior or decoder is needed;
  // for uniform it is optional (present -> uniform skills through the
  // decoder, absent -> uniform primitive actions).
  const std::string skill_prefix = resolve_path(rc, rc.skill_prefix);
  const bool have_skills = std::filesystem::exists(skill_prefix + ".json");
  std::unique_ptr<skillmodel::SkillModel<float>> sm;
  std::unique_ptr<rl::Agent<float>> agent;
  rl::SkillExecutor<float> ex;
  ex.action_dim = 2;
  rl::PriorHandle<float> prior;

  if (source == rl::SkillSource::kPrior) {
    if (!have_skills)
      throw UsageError("plot-exploration: source=prior needs a skill "
                       "checkpoint at " + skill_prefix);
    sm = std::make_unique<skillmodel::SkillModel<float>>(
        skillmodel::load_skill_model<float>(skill_prefix));
    prior.model = sm.get();
    if (sm->cfg.horizon > 1) ex.decoder = sm.get();
  } else if (source == rl::SkillSource::kUniform) {
    if (have_skills) {
      sm = std::make_unique<skillmodel::SkillModel<float>>(
          skillmodel::load_skill_model<float>(skill_prefix));
      if (sm->cfg.horizon > 1) ex.decoder = sm.get();
    }
  } else {  // policy
    const std::string ckpt =
        rc.agent_checkpoint.empty()
            ? resolve_path(rc, rc.agent_prefix) + ".final"
            : resolve_path(rc, rc.agent_checkpoint);
    agent = std::make_unique<rl::Agent<float>>(rl::load_agent<float>(ckpt));
    if (rl::uses_skill_space(agent->cfg.variant)) {
      if (!have_skills)
        throw UsageError("plot-exploration: this agent acts in skill space "
                         "and needs a skill checkpoint at " + skill_prefix);
      sm = std::make_unique<skillmodel::SkillModel<float>>(
          skillmodel::load_skill_model<float>(skill_prefix));
      detail::check_skill_model_matches_agent(sm->cfg, *agent);
      ex.decoder = sm.get();
    }
    if (envs::observation_dim(task.env_cfg.patch_k) != agent->obs_dim)
      throw UsageError("plot-exploration: task observation size disagrees "
                       "with the agent");
  }

  if (sm && envs::observation_dim(task.env_cfg.patch_k) != sm->cfg.obs_dim)
    throw UsageError("plot-exploration: task observation size disagrees with "
                     "the skill checkpoint");

  // Identity executors take raw actions; squash bounds and uniform draws
  // live on the action box. Decoder executors sample/squash in latent units.
  const double range = ex.decoder ? rc.rl.action_range : rc.env.a_max;
  std::cout << "executor: "
            << (ex.decoder ? "skill decoder (horizon " +
                                 std::to_string(ex.decoder->cfg.horizon) + ")"
                           : std::string("primitive actions"))
            << ", source " << rc.explore_source << "\n";

  envs::MazeEnv env(task.layout, task.env_cfg);
  env.reset(task.start, task.goal);
  Rng rng = make_rng(rc.seed, 60);
  const rl::OccupancyResult occ = rl::occupancy_rollout(
      env, ex, prior, source, range, rc.explore_steps, rng, agent.get());

  const std::string out_prefix = resolve_path(rc, rc.explore_prefix);
  const std::string csv_path = out_prefix + ".occupancy.csv";
  const std::string pgm_path = out_prefix + ".occupancy.pgm";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw IoError("cannot write " + csv_path);
  for (int r = 0; r < occ.height; ++r) {
    for (int c = 0; c < occ.width; ++c) {
      if (c) csv << ',';
      csv << occ.counts[std::size_t(r) * std::size_t(occ.width) + std::size_t(c)];
    }
    csv << '\n';
  }
  if (!csv.flush()) throw IoError("failed writing " + csv_path);

  const std::int64_t max_count =
      *std::max_element(occ.counts.begin(), occ.counts.end());
  std::ofstream pgm(pgm_path, std::ios::trunc);
  if (!pgm) throw IoError("cannot write " + pgm_path);
  pgm << "P2\n" << occ.width << ' ' << occ.height << "\n255\n";
  for (int r = 0; r < occ.height; ++r) {
    for (int c = 0; c < occ.width; ++c) {
      const std::int64_t count =
          occ.counts[std::size_t(r) * std::size_t(occ.width) + std::size_t(c)];
      const long pixel =
          max_count > 0 ? std::lround(255.0 * double(count) / double(max_count))
                        : 0;
      if (c) pgm << ' ';
      pgm << pixel;
    }
    pgm << '\n';
  }
  if (!pgm.flush()) throw IoError("failed writing " + pgm_path);

  std::cout << "coverage " << occ.coverage << "\n"
            << "positions " << rc.explore_steps << "\n"
            << "histogram: " << csv_path << "\n"
            << "image: " << pgm_path << "\n";
  return 0;
}

// ---- argument parsing and dispatch ------------------------------------

namespace detail {

// Flags shared by every subcommand.
struct CommonFlags {
  std::string config_path;
  std::string run_dir;
  std::uint64_t seed = 0;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON config file (overrides defaults; flags override it)");
    sub->add_option("--run-dir", run_dir, "directory for all artifacts");
    sub->add_option("--seed", seed, "master random seed");
  }
  void apply(CLI::App* sub, RunConfig& rc) const {
    if (!config_path.empty()) merge_config_file(config_path, rc);
    if (sub->count("--run-dir")) rc.run_dir = run_dir;
    if (sub->count("--seed")) rc.seed = seed;
  }
};

// World/task override flags for commands that build an environment.
struct WorldFlags {
  int maze_width = 0, maze_height = 0;
  double door_density = 0.0;
  std::uint64_t maze_seed = 0;
  int t_max = 0;
  int start_row = 0, start_col = 0, goal_row = 0, goal_col = 0;

  void attach(CLI::App* sub) {
    sub->add_option("--maze-width", maze_width, "layout width in cells");
    sub->add_option("--maze-height", maze_height, "layout height in cells");
    sub->add_option("--door-density", door_density, "doorway density in (0, 1]");
    sub->add_option("--maze-seed", maze_seed, "layout generation seed");
    sub->add_option("--t-max", t_max, "episode step limit");
    sub->add_option("--start-row", start_row, "task start cell row");
    sub->add_option("--start-col", start_col, "task start cell column");
    sub->add_option("--goal-row", goal_row, "task goal cell row");
    sub->add_option("--goal-col", goal_col, "task goal cell column");
  }
  void apply(CLI::App* sub, RunConfig& rc) const {
    if (sub->count("--maze-width")) rc.maze_width = maze_width;
    if (sub->count("--maze-height")) rc.maze_height = maze_height;
    if (sub->count("--door-density")) rc.door_density = door_density;
    if (sub->count("--maze-seed")) rc.maze_seed = maze_seed;
    if (sub->count("--t-max")) rc.env.t_max = t_max;
    if (sub->count("--start-row")) rc.start_row = start_row;
    if (sub->count("--start-col")) rc.start_col = start_col;
    if (sub->count("--goal-row")) rc.goal_row = goal_row;
    if (sub->count("--goal-col")) rc.goal_col = goal_col;
  }
};

}  // namespace detail

// The whole command-line program. Returns the process exit code instead of
// calling exit(), so tests can drive it in-process.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"skill-prior reinforcement learning toolkit"};
  app.require_subcommand(1);

  detail::CommonFlags common[5];
  detail::WorldFlags world[3];  // train-rl, eval, plot-exploration

  // collect
  CLI::App* collect = app.add_subcommand(
      "collect", "roll out expert/random trajectories into a dataset");
  common[0].attach(collect);
  std::int64_t num = 0;
  double mix_random = 0.0;
  std::string collect_out;
  int collect_maze_w = 0, collect_maze_h = 0, collect_t_max = 0;
  double collect_density = 0.0;
  double noise_scale = 0.0;
  collect->add_option("--num", num, "number of trajectories");
  collect->add_option("--mix-random", mix_random,
                      "fraction of random-policy trajectories in [0, 1]");
  collect->add_option("--out", collect_out, "dataset output path");
  collect->add_option("--maze-width", collect_maze_w, "layout width in cells");
  collect->add_option("--maze-height", collect_maze_h, "layout height in cells");
  collect->add_option("--door-density", collect_density,
                      "doorway density in (0, 1]");
  collect->add_option("--t-max", collect_t_max, "collection episode step limit");
  collect->add_option("--noise-scale", noise_scale,
                      "expert action noise std-dev");

  // train-skills
  CLI::App* skills = app.add_subcommand(
      "train-skills",
      "train the skill autoencoder + prior (horizon 1: flat action prior)");
  common[1].attach(skills);
  std::string skills_dataset, skills_out, resume_from;
  int horizon = 0, z_dim = 0, batch_size = 0, eval_every = 0;
  double beta = 0.0;
  long long train_steps = 0;
  skills->add_option("--dataset", skills_dataset, "training dataset path");
  skills->add_option("--out", skills_out, "checkpoint output prefix");
  skills->add_option("--horizon", horizon, "actions per skill segment");
  skills->add_option("--z-dim", z_dim, "skill latent dimensionality");
  skills->add_option("--beta", beta, "latent regularization weight");
  skills->add_option("--train-steps", train_steps, "total optimizer steps");
  skills->add_option("--batch-size", batch_size, "segments per batch");
  skills->add_option("--eval-every", eval_every, "validation cadence in steps");
  skills->add_option("--resume-from", resume_from,
                     "checkpoint prefix to continue training from");

  // train-rl
  CLI::App* trainrl = app.add_subcommand(
      "train-rl", "train one agent variant on the downstream task");
  common[2].attach(trainrl);
  world[0].attach(trainrl);
  std::string variant, rl_dataset, rl_skills, rl_out;
  std::int64_t train_env_steps = 0, rl_eval_every = 0, warmup = 0;
  double omega_initial = 0.0, stop_success = 0.0;
  std::int64_t omega_hold = 0, omega_anneal = 0;
  int stop_consecutive = 0;
  trainrl->add_option("--variant", variant,
                      "spirl | sac | bc_sac | flat_prior | ssp_no_prior");
  trainrl->add_option("--dataset", rl_dataset,
                      "dataset for bc_sac pretraining");
  trainrl->add_option("--skill-checkpoint", rl_skills,
                      "skill checkpoint prefix (decoder/prior variants)");
  trainrl->add_option("--out", rl_out, "agent output prefix");
  trainrl->add_option("--train-env-steps", train_env_steps,
                      "training budget in primitive env steps");
  trainrl->add_option("--eval-every", rl_eval_every,
                      "evaluation cadence in decisions");
  trainrl->add_option("--warmup", warmup,
                      "decisions collected before updates start");
  trainrl->add_option("--omega-initial", omega_initial,
                      "initial prior-sampling fraction");
  trainrl->add_option("--omega-hold", omega_hold,
                      "decisions to hold omega before annealing");
  trainrl->add_option("--omega-anneal", omega_anneal,
                      "decisions to anneal omega to zero");
  trainrl->add_flag("--no-prior-init",
                    "do not initialize the policy from the skill prior");
  trainrl->add_option("--stop-success", stop_success,
                      "stop once eval success reaches this rate");
  trainrl->add_option("--stop-consecutive", stop_consecutive,
                      "evaluations in a row the stop rule needs");

  // eval
  CLI::App* eval = app.add_subcommand(
      "eval", "evaluate a trained agent and write metrics JSON");
  common[3].attach(eval);
  world[1].attach(eval);
  std::string eval_agent, eval_skills, eval_out;
  int episodes = 0;
  eval->add_option("--agent-checkpoint", eval_agent,
                   "agent checkpoint prefix (default <agent_prefix>.final)");
  eval->add_option("--skill-checkpoint", eval_skills,
                   "skill checkpoint prefix for skill-space agents");
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_option("--out", eval_out, "metrics JSON output path");

  // plot-exploration
  CLI::App* plot = app.add_subcommand(
      "plot-exploration",
      "export an exploration visit-count histogram (CSV + PGM)");
  common[4].attach(plot);
  world[2].attach(plot);
  std::string source, plot_skills, plot_agent, plot_out;
  std::int64_t steps = 0;
  plot->add_option("--source", source, "policy | prior | uniform");
  plot->add_option("--steps", steps, "env steps to record");
  plot->add_option("--skill-checkpoint", plot_skills,
                   "skill checkpoint prefix (required for prior)");
  plot->add_option("--agent-checkpoint", plot_agent,
                   "agent checkpoint prefix (required for policy)");
  plot->add_option("--out", plot_out, "output prefix for histogram files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the parse error
    return 1;
  }

  try {
    RunConfig rc;
    if (collect->parsed()) {
      common[0].apply(collect, rc);
      if (collect->count("--num")) rc.collect_num = num;
      if (collect->count("--mix-random")) rc.mix_random = mix_random;
      if (collect->count("--out")) rc.dataset_path = collect_out;
      if (collect->count("--maze-width")) rc.maze_width = collect_maze_w;
      if (collect->count("--maze-height")) rc.maze_height = collect_maze_h;
      if (collect->count("--door-density")) rc.door_density = collect_density;
      if (collect->count("--t-max")) rc.collect_t_max = collect_t_max;
      if (collect->count("--noise-scale")) rc.expert.noise_scale = noise_scale;
      return cmd_collect(rc);
    }
    if (skills->parsed()) {
      common[1].apply(skills, rc);
      if (skills->count("--dataset")) rc.dataset_path = skills_dataset;
      if (skills->count("--out")) rc.skill_prefix = skills_out;
      if (skills->count("--horizon")) rc.skill.horizon = horizon;
      if (skills->count("--z-dim")) rc.skill.z_dim = z_dim;
      if (skills->count("--beta")) rc.skill.beta = beta;
      if (skills->count("--train-steps")) rc.skill.train_steps = train_steps;
      if (skills->count("--batch-size")) rc.skill.batch_size = batch_size;
      if (skills->count("--eval-every")) rc.skill.eval_every = eval_every;
      if (skills->count("--resume-from")) rc.resume_from = resume_from;
      return cmd_train_skills(rc);
    }
    if (trainrl->parsed()) {
      common[2].apply(trainrl, rc);
      world[0].apply(trainrl, rc);
      if (trainrl->count("--variant"))
        rc.rl.variant = rl::variant_from_name(variant);
      if (trainrl->count("--dataset")) rc.dataset_path = rl_dataset;
      if (trainrl->count("--skill-checkpoint")) rc.skill_prefix = rl_skills;
      if (trainrl->count("--out")) rc.agent_prefix = rl_out;
      if (trainrl->count("--train-env-steps"))
        rc.rl.train_env_steps = train_env_steps;
      if (trainrl->count("--eval-every"))
        rc.rl.eval_every_decisions = rl_eval_every;
      if (trainrl->count("--warmup")) rc.rl.warmup_decisions = warmup;
      if (trainrl->count("--omega-initial")) rc.rl.omega.initial = omega_initial;
      if (trainrl->count("--omega-hold")) rc.rl.omega.hold_decisions = omega_hold;
      if (trainrl->count("--omega-anneal"))
        rc.rl.omega.anneal_decisions = omega_anneal;
      if (trainrl->count("--no-prior-init")) rc.rl.prior_init = false;
      if (trainrl->count("--stop-success")) rc.stop_success = stop_success;
      if (trainrl->count("--stop-consecutive"))
        rc.stop_consecutive = stop_consecutive;
      return cmd_train_rl(rc);
    }
    if (eval->parsed()) {
      common[3].apply(eval, rc);
      world[1].apply(eval, rc);
      if (eval->count("--agent-checkpoint")) rc.agent_checkpoint = eval_agent;
      if (eval->count("--skill-checkpoint")) rc.skill_prefix = eval_skills;
      if (eval->count("--episodes")) rc.eval_episodes = episodes;
      if (eval->count("--out")) rc.metrics_path = eval_out;
      return cmd_eval(rc);
    }
    if (plot->parsed()) {
      common[4].apply(plot, rc);
      world[2].apply(plot, rc);
      if (plot->count("--source")) rc.explore_source = source;
      if (plot->count("--steps")) rc.explore_steps = steps;
      if (plot->count("--skill-checkpoint")) rc.skill_prefix = plot_skills;
      if (plot->count("--agent-checkpoint")) rc.agent_checkpoint = plot_agent;
      if (plot->count("--out")) rc.explore_prefix = plot_out;
      return cmd_plot_exploration(rc);
    }
    throw UsageError("no subcommand selected");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sprl::cli
