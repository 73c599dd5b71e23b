// Run configuration for the command-line tools.
//
// One document drives every subcommand: defaults declared here, optionally
// overridden by a JSON config file (--config), then by command-line flags.
// Unknown keys anywhere in the document are rejected, and the fully resolved
// configuration is echoed into the run directory so every run is auditable
// and reproducible from its echo + seed.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "sprl/common/errors.h"
#include "sprl/envs/env.h"
#include "sprl/envs/rollouts.h"
#include "sprl/rl/agent.h"
#include "sprl/skillmodel/model.h"

namespace sprl::cli {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string run_dir = "run";

  // World: procedural maze layout generation.
  int maze_width = 8;
  int maze_height = 8;
  double door_density = 0.6;
  std::uint64_t maze_seed = 1;

  // Environment dynamics/observation settings (t_max here is the downstream
  // budget; collection uses collect.t_max below).
  envs::EnvConfig env{};

  // Downstream task cells; -1 keeps the layout's own start/goal.
  int start_row = -1, start_col = -1;
  int goal_row = -1, goal_col = -1;

  // collect
  std::int64_t collect_num = 100;
  double mix_random = 0.0;  // fraction of trajectories from the random policy
  int collect_t_max = 400;
  envs::ExpertConfig expert{};

  // skill model (train-skills; horizon == 1 trains the flat action prior)
  skillmodel::SkillModelConfig skill{};

  // rl (train-rl) + optional early-stop rule
  rl::RLConfig rl{};
  double stop_success = -1.0;  // stop once eval success >= this (off when < 0)
  int stop_consecutive = 2;    // ... for this many consecutive evaluations

  // bc (behavioral-cloning pretraining for the bc_sac variant)
  int bc_batch_size = 256;
  std::int64_t bc_train_steps = 20000;
  double bc_learning_rate = 3e-4;

  // eval
  int eval_episodes = 20;

  // plot-exploration
  std::int64_t explore_steps = 100000;
  std::string explore_source = "prior";  // policy | prior | uniform

  // Paths, resolved relative to run_dir unless absolute.
  std::string dataset_path = "dataset.spds";
  std::string skill_prefix = "skills";     // skill-model checkpoint prefix
  std::string agent_prefix = "agent";      // RL training output prefix
  std::string agent_checkpoint;            // "" -> <agent_prefix>.final
  std::string resume_from;                 // "" -> fresh skill training
  std::string metrics_path = "metrics.json";
  std::string explore_prefix = "exploration";
};

namespace detail {

// Every config-document problem is a usage error: the invocation handed us a
// bad document.
inline void reject_unknown(const nlohmann::json& j, const std::string& where,
                           std::initializer_list<const char*> keys) {
  if (!j.is_object())
    throw UsageError("config: '" + where + "' must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw UsageError("config: unknown key '" + where + "." + item.key() +
                       "'");
  }
}

template <class T>
void take(const nlohmann::json& j, const std::string& where, const char* key,
          T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config: bad value for '" + where + "." + key +
                     "': " + e.what());
  }
}

inline void merge_world(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "world",
                 {"maze_width", "maze_height", "door_density", "maze_seed"});
  take(j, "world", "maze_width", c.maze_width);
  take(j, "world", "maze_height", c.maze_height);
  take(j, "world", "door_density", c.door_density);
  take(j, "world", "maze_seed", c.maze_seed);
}

inline void merge_env(const nlohmann::json& j, envs::EnvConfig& e) {
  reject_unknown(j, "env", {"a_max", "v_max", "reward_radius", "t_max", "patch_k"});
  take(j, "env", "a_max", e.a_max);
  take(j, "env", "v_max", e.v_max);
  take(j, "env", "reward_radius", e.reward_radius);
  take(j, "env", "t_max", e.t_max);
  take(j, "env", "patch_k", e.patch_k);
}

inline void merge_task(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "task", {"start_row", "start_col", "goal_row", "goal_col"});
  take(j, "task", "start_row", c.start_row);
  take(j, "task", "start_col", c.start_col);
  take(j, "task", "goal_row", c.goal_row);
  take(j, "task", "goal_col", c.goal_col);
}

inline void merge_collect(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "collect",
                 {"num", "mix_random", "t_max", "noise_scale", "subgoal_jitter",
                  "waypoint_gain", "capture_radius"});
  take(j, "collect", "num", c.collect_num);
  take(j, "collect", "mix_random", c.mix_random);
  take(j, "collect", "t_max", c.collect_t_max);
  take(j, "collect", "noise_scale", c.expert.noise_scale);
  take(j, "collect", "subgoal_jitter", c.expert.subgoal_jitter);
  take(j, "collect", "waypoint_gain", c.expert.waypoint_gain);
  take(j, "collect", "capture_radius", c.expert.capture_radius);
}

inline void merge_optimizer(const nlohmann::json& j, const std::string& where,
                            OptimizerConfig& o) {
  reject_unknown(j, where,
                 {"kind", "beta1", "beta2", "learning_rate", "epsilon"});
  if (j.contains("kind")) {
    std::string kind;
    take(j, where, "kind", kind);
    if (kind == "radam")
      o.kind = OptimizerKind::kRadam;
    else if (kind == "adam")
      o.kind = OptimizerKind::kAdam;
    else
      throw UsageError("config: " + where + ".kind must be 'adam' or 'radam'");
  }
  take(j, where, "beta1", o.beta1);
  take(j, where, "beta2", o.beta2);
  take(j, where, "learning_rate", o.learning_rate);
  take(j, where, "epsilon", o.epsilon);
}

inline void merge_skill(const nlohmann::json& j, skillmodel::SkillModelConfig& s) {
  reject_unknown(j, "skill_model",
                 {"horizon", "z_dim", "beta", "obs_dim", "action_dim",
                  "action_scale", "encoder_hidden", "decoder_hidden",
                  "prior_layers", "prior_hidden", "batch_size", "train_steps",
                  "eval_every", "val_batch_size", "optimizer"});
  take(j, "skill_model", "horizon", s.horizon);
  take(j, "skill_model", "z_dim", s.z_dim);
  take(j, "skill_model", "beta", s.beta);
  take(j, "skill_model", "obs_dim", s.obs_dim);
  take(j, "skill_model", "action_dim", s.action_dim);
  take(j, "skill_model", "action_scale", s.action_scale);
  take(j, "skill_model", "encoder_hidden", s.encoder_hidden);
  take(j, "skill_model", "decoder_hidden", s.decoder_hidden);
  take(j, "skill_model", "prior_layers", s.prior_layers);
  take(j, "skill_model", "prior_hidden", s.prior_hidden);
  take(j, "skill_model", "batch_size", s.batch_size);
  take(j, "skill_model", "train_steps", s.train_steps);
  take(j, "skill_model", "eval_every", s.eval_every);
  take(j, "skill_model", "val_batch_size", s.val_batch_size);
  if (j.contains("optimizer"))
    merge_optimizer(j.at("optimizer"), "skill_model.optimizer", s.optimizer);
}

inline void merge_rl(const nlohmann::json& j, RunConfig& c) {
  rl::RLConfig& r = c.rl;
  reject_unknown(
      j, "rl",
      {"gamma", "delta", "tau", "lr_pi", "lr_q", "lr_alpha", "batch_size",
       "buffer_capacity", "warmup_decisions", "alpha_init", "horizon",
       "action_range", "variant", "omega", "prior_init", "train_env_steps",
       "eval_every_decisions", "eval_episodes", "net_layers", "net_hidden",
       "flat_update_every", "stop_success", "stop_consecutive"});
  take(j, "rl", "gamma", r.gamma);
  take(j, "rl", "delta", r.delta);
  take(j, "rl", "tau", r.tau);
  take(j, "rl", "lr_pi", r.lr_pi);
  take(j, "rl", "lr_q", r.lr_q);
  take(j, "rl", "lr_alpha", r.lr_alpha);
  take(j, "rl", "batch_size", r.batch_size);
  take(j, "rl", "buffer_capacity", r.buffer_capacity);
  take(j, "rl", "warmup_decisions", r.warmup_decisions);
  take(j, "rl", "alpha_init", r.alpha_init);
  take(j, "rl", "horizon", r.horizon);
  take(j, "rl", "action_range", r.action_range);
  if (j.contains("variant")) {
    std::string name;
    take(j, "rl", "variant", name);
    r.variant = rl::variant_from_name(name);
  }
  if (j.contains("omega")) {
    const nlohmann::json& om = j.at("omega");
    reject_unknown(om, "rl.omega",
                   {"initial", "hold_decisions", "anneal_decisions"});
    take(om, "rl.omega", "initial", r.omega.initial);
    take(om, "rl.omega", "hold_decisions", r.omega.hold_decisions);
    take(om, "rl.omega", "anneal_decisions", r.omega.anneal_decisions);
  }
  take(j, "rl", "prior_init", r.prior_init);
  take(j, "rl", "train_env_steps", r.train_env_steps);
  take(j, "rl", "eval_every_decisions", r.eval_every_decisions);
  take(j, "rl", "eval_episodes", r.eval_episodes);
  take(j, "rl", "net_layers", r.net_layers);
  take(j, "rl", "net_hidden", r.net_hidden);
  take(j, "rl", "flat_update_every", r.flat_update_every);
  take(j, "rl", "stop_success", c.stop_success);
  take(j, "rl", "stop_consecutive", c.stop_consecutive);
}

inline void merge_bc(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "bc", {"batch_size", "train_steps", "learning_rate"});
  take(j, "bc", "batch_size", c.bc_batch_size);
  take(j, "bc", "train_steps", c.bc_train_steps);
  take(j, "bc", "learning_rate", c.bc_learning_rate);
}

inline void merge_eval(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "eval", {"episodes"});
  take(j, "eval", "episodes", c.eval_episodes);
}

inline void merge_explore(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "explore", {"steps", "source"});
  take(j, "explore", "steps", c.explore_steps);
  take(j, "explore", "source", c.explore_source);
}

inline void merge_paths(const nlohmann::json& j, RunConfig& c) {
  reject_unknown(j, "paths",
                 {"dataset", "skill_prefix", "agent_prefix", "agent_checkpoint",
                  "resume_from", "metrics", "explore_prefix"});
  take(j, "paths", "dataset", c.dataset_path);
  take(j, "paths", "skill_prefix", c.skill_prefix);
  take(j, "paths", "agent_prefix", c.agent_prefix);
  take(j, "paths", "agent_checkpoint", c.agent_checkpoint);
  take(j, "paths", "resume_from", c.resume_from);
  take(j, "paths", "metrics", c.metrics_path);
  take(j, "paths", "explore_prefix", c.explore_prefix);
}

}  // namespace detail

// Applies a parsed config document on top of `c`. Only present keys override;
// unknown keys anywhere are usage errors.
inline void merge_config_json(const nlohmann::json& j, RunConfig& c) {
  detail::reject_unknown(j, "top-level",
                         {"seed", "run_dir", "world", "env", "task", "collect",
                          "skill_model", "rl", "bc", "eval", "explore",
                          "paths"});
  detail::take(j, "top-level", "seed", c.seed);
  detail::take(j, "top-level", "run_dir", c.run_dir);
  if (j.contains("world")) detail::merge_world(j.at("world"), c);
  if (j.contains("env")) detail::merge_env(j.at("env"), c.env);
  if (j.contains("task")) detail::merge_task(j.at("task"), c);
  if (j.contains("collect")) detail::merge_collect(j.at("collect"), c);
  if (j.contains("skill_model")) detail::merge_skill(j.at("skill_model"), c.skill);
  if (j.contains("rl")) detail::merge_rl(j.at("rl"), c);
  if (j.contains("bc")) detail::merge_bc(j.at("bc"), c);
  if (j.contains("eval")) detail::merge_eval(j.at("eval"), c);
  if (j.contains("explore")) detail::merge_explore(j.at("explore"), c);
  if (j.contains("paths")) detail::merge_paths(j.at("paths"), c);
}

// Loads a config file on top of `c`.
inline void merge_config_file(const std::string& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  merge_config_json(j, c);
}

// Full resolved document, inverse of merge_config_json over known keys.
inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json rl_j = rl::rl_config_to_json(c.rl);
  rl_j["stop_success"] = c.stop_success;
  rl_j["stop_consecutive"] = c.stop_consecutive;
  return nlohmann::json{
      {"seed", c.seed},
      {"run_dir", c.run_dir},
      {"world",
       {{"maze_width", c.maze_width},
        {"maze_height", c.maze_height},
        {"door_density", c.door_density},
        {"maze_seed", c.maze_seed}}},
      {"env",
       {{"a_max", c.env.a_max},
        {"v_max", c.env.v_max},
        {"reward_radius", c.env.reward_radius},
        {"t_max", c.env.t_max},
        {"patch_k", c.env.patch_k}}},
      {"task",
       {{"start_row", c.start_row},
        {"start_col", c.start_col},
        {"goal_row", c.goal_row},
        {"goal_col", c.goal_col}}},
      {"collect",
       {{"num", c.collect_num},
        {"mix_random", c.mix_random},
        {"t_max", c.collect_t_max},
        {"noise_scale", c.expert.noise_scale},
        {"subgoal_jitter", c.expert.subgoal_jitter},
        {"waypoint_gain", c.expert.waypoint_gain},
        {"capture_radius", c.expert.capture_radius}}},
      {"skill_model", skillmodel::config_to_json(c.skill)},
      {"rl", rl_j},
      {"bc",
       {{"batch_size", c.bc_batch_size},
        {"train_steps", c.bc_train_steps},
        {"learning_rate", c.bc_learning_rate}}},
      {"eval", {{"episodes", c.eval_episodes}}},
      {"explore", {{"steps", c.explore_steps}, {"source", c.explore_source}}},
      {"paths",
       {{"dataset", c.dataset_path},
        {"skill_prefix", c.skill_prefix},
        {"agent_prefix", c.agent_prefix},
        {"agent_checkpoint", c.agent_checkpoint},
        {"resume_from", c.resume_from},
        {"metrics", c.metrics_path},
        {"explore_prefix", c.explore_prefix}}},
  };
}

// Resolves a possibly-relative path against the run directory.
inline std::string resolve_path(const RunConfig& c, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return p;
  return (std::filesystem::path(c.run_dir) / fp).string();
}

// Creates the run directory and writes the resolved config next to the
// command's artifacts as `<run_dir>/<command>.config.json`.
inline void echo_config(const RunConfig& c, const std::string& command) {
  std::error_code ec;
  std::filesystem::create_directories(c.run_dir, ec);
  if (ec)
    throw IoError("cannot create run directory '" + c.run_dir +
                  "': " + ec.message());
  // The echo is itself a valid --config document (the filename carries the
  // command), so any run can be replayed from its echo alone.
  const std::string path =
      (std::filesystem::path(c.run_dir) / (command + ".config.json")).string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << run_config_to_json(c).dump(2) << "\n";
  if (!out.flush()) throw IoError("failed writing " + path);
}

}  // namespace sprl::cli
