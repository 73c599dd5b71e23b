// KL-regularized soft actor-critic over a latent decision space.
//
// The agent picks a latent z once every H primitive steps; a frozen decoder
// (or the identity, for flat variants) turns z into primitive actions.  The
// usual entropy bonus is replaced by a penalty D_KL(pi(z|s) || p(z|s)) against
// a reference prior: a learned state-conditioned Gaussian, or the uniform
// distribution over the squashed latent box (which recovers standard
// max-entropy SAC up to an additive constant).
//
// Update rules:
//   target   Q_bar = r + gamma * mask * (min_i Qt_i(s', z') - alpha * D(s'))
//   critic   L_q   = 1/2 mean (Q_1 - Q_bar)^2 + 1/2 mean (Q_2 - Q_bar)^2
//   policy   L_pi  = mean (alpha * D(s) - min_i Q_i(s, z)),  z reparameterized
//   alpha    log_alpha ascends on (mean D - delta): the penalty weight grows
//            while the policy diverges from the prior more than delta nats
//   targets  theta_t <- tau * theta + (1 - tau) * theta_t
// where mask = 0 only when the window truly ended the episode (timeouts
// bootstrap) and D is the analytic KL between the pre-squash Gaussians
// (learned prior) or the sampled log-density plus log-volume (uniform prior).
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/nn/checkpoint.h"
#include "sprl/nn/distributions.h"
#include "sprl/nn/graph.h"
#include "sprl/nn/modules.h"
#include "sprl/nn/params.h"
#include "sprl/rl/replay.h"
#include "sprl/skillmodel/model.h"

namespace sprl::rl {

enum class Variant { kSpirl, kSac, kBcSac, kFlatPrior, kSspNoPrior };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kSpirl: return "spirl";
    case Variant::kSac: return "sac";
    case Variant::kBcSac: return "bc_sac";
    case Variant::kFlatPrior: return "flat_prior";
    case Variant::kSspNoPrior: return "ssp_no_prior";
  }
  throw UsageError("unknown variant");
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "spirl") return Variant::kSpirl;
  if (name == "sac") return Variant::kSac;
  if (name == "bc_sac") return Variant::kBcSac;
  if (name == "flat_prior") return Variant::kFlatPrior;
  if (name == "ssp_no_prior") return Variant::kSspNoPrior;
  throw UsageError("unknown variant name: " + name);
}

// True when the variant regularizes against a learned prior; the others use
// the uniform distribution over the squashed box (entropy regularization).
inline bool uses_learned_prior(Variant v) {
  return v == Variant::kSpirl || v == Variant::kFlatPrior;
}

// True when the variant acts through a skill decoder (latent horizon > 1).
inline bool uses_skill_space(Variant v) {
  return v == Variant::kSpirl || v == Variant::kSspNoPrior;
}

// Fraction of decisions drawn from the prior instead of the policy, counted
// in decisions: omega = initial for the first hold_decisions, then decays
// linearly to zero over anneal_decisions.  Disabled when initial == 0 (the
// default; prior-initialized policies do not need it).
struct OmegaSchedule {
  double initial = 0.0;
  std::int64_t hold_decisions = 0;
  std::int64_t anneal_decisions = 0;
};

inline double omega_at(const OmegaSchedule& s, std::int64_t decision) {
  if (s.initial <= 0.0) return 0.0;
  if (decision < s.hold_decisions) return s.initial;
  if (s.anneal_decisions <= 0) return 0.0;
  const double progress =
      double(decision - s.hold_decisions) / double(s.anneal_decisions);
  if (progress >= 1.0) return 0.0;
  return s.initial * (1.0 - progress);
}

struct RLConfig {
  double gamma = 0.99;           // discount per high-level decision
  double delta = 1.0;            // target divergence (nats) for alpha tuning
  double tau = 5e-3;             // Polyak rate for target networks
  double lr_pi = 3e-4;
  double lr_q = 3e-4;
  double lr_alpha = 3e-4;
  int batch_size = 256;
  std::int64_t buffer_capacity = 200000;
  std::int64_t warmup_decisions = 2000;  // decisions before updates begin
  double alpha_init = 1.0;
  int horizon = 10;              // primitive steps per decision
  double action_range = 2.0;     // squash bound for the latent
  Variant variant = Variant::kSpirl;
  OmegaSchedule omega;
  bool prior_init = true;        // copy prior weights into the policy
  std::int64_t train_env_steps = 1500000;  // budget in primitive env steps
  std::int64_t eval_every_decisions = 1000;
  int eval_episodes = 1;
  int net_layers = 4;            // hidden layers in policy/critic trunks
  int net_hidden = 64;
  // Gradient-step cadence for horizon == 1 variants: one update per this many
  // decisions (= env steps), so every variant takes one gradient step per
  // skill-horizon's worth of experience.  Horizon > 1 updates once a decision.
  int flat_update_every = 10;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw UsageError("rl: gamma must lie in (0, 1)");
    if (!(delta > 0.0)) throw UsageError("rl: delta must be positive");
    if (!(tau > 0.0 && tau <= 1.0))
      throw UsageError("rl: tau must lie in (0, 1]");
    if (lr_pi <= 0.0 || lr_q <= 0.0 || lr_alpha <= 0.0)
      throw UsageError("rl: learning rates must be positive");
    if (batch_size <= 0) throw UsageError("rl: batch size must be positive");
    if (buffer_capacity < batch_size)
      throw UsageError("rl: buffer capacity must be >= batch size");
    if (warmup_decisions < 0) throw UsageError("rl: warmup must be >= 0");
    if (alpha_init <= 0.0) throw UsageError("rl: alpha_init must be positive");
    if (horizon <= 0) throw UsageError("rl: horizon must be positive");
    if (action_range <= 0.0)
      throw UsageError("rl: action range must be positive");
    if (train_env_steps <= 0)
      throw UsageError("rl: training budget must be positive");
    if (eval_every_decisions <= 0 || eval_episodes <= 0)
      throw UsageError("rl: eval settings must be positive");
    if (net_layers <= 0 || net_hidden <= 0)
      throw UsageError("rl: network shape must be positive");
    if (flat_update_every <= 0)
      throw UsageError("rl: flat update cadence must be positive");
    if (omega.initial < 0.0 || omega.initial > 1.0)
      throw UsageError("rl: omega initial must lie in [0, 1]");
    if (omega.hold_decisions < 0 || omega.anneal_decisions < 0)
      throw UsageError("rl: omega schedule lengths must be >= 0");
  }
};

inline nlohmann::json rl_config_to_json(const RLConfig& c) {
  return nlohmann::json{
      {"gamma", c.gamma},
      {"delta", c.delta},
      {"tau", c.tau},
      {"lr_pi", c.lr_pi},
      {"lr_q", c.lr_q},
      {"lr_alpha", c.lr_alpha},
      {"batch_size", c.batch_size},
      {"buffer_capacity", c.buffer_capacity},
      {"warmup_decisions", c.warmup_decisions},
      {"alpha_init", c.alpha_init},
      {"horizon", c.horizon},
      {"action_range", c.action_range},
      {"variant", variant_name(c.variant)},
      {"omega",
       {{"initial", c.omega.initial},
        {"hold_decisions", c.omega.hold_decisions},
        {"anneal_decisions", c.omega.anneal_decisions}}},
      {"prior_init", c.prior_init},
      {"train_env_steps", c.train_env_steps},
      {"eval_every_decisions", c.eval_every_decisions},
      {"eval_episodes", c.eval_episodes},
      {"net_layers", c.net_layers},
      {"net_hidden", c.net_hidden},
      {"flat_update_every", c.flat_update_every},
  };
}

inline RLConfig rl_config_from_json(const nlohmann::json& j) {
  RLConfig c;
  try {
    c.gamma = j.at("gamma").get<double>();
    c.delta = j.at("delta").get<double>();
    c.tau = j.at("tau").get<double>();
    c.lr_pi = j.at("lr_pi").get<double>();
    c.lr_q = j.at("lr_q").get<double>();
    c.lr_alpha = j.at("lr_alpha").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.buffer_capacity = j.at("buffer_capacity").get<std::int64_t>();
    c.warmup_decisions = j.at("warmup_decisions").get<std::int64_t>();
    c.alpha_init = j.at("alpha_init").get<double>();
    c.horizon = j.at("horizon").get<int>();
    c.action_range = j.at("action_range").get<double>();
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    const auto& om = j.at("omega");
    c.omega.initial = om.at("initial").get<double>();
    c.omega.hold_decisions = om.at("hold_decisions").get<std::int64_t>();
    c.omega.anneal_decisions = om.at("anneal_decisions").get<std::int64_t>();
    c.prior_init = j.at("prior_init").get<bool>();
    c.train_env_steps = j.at("train_env_steps").get<std::int64_t>();
    c.eval_every_decisions = j.at("eval_every_decisions").get<std::int64_t>();
    c.eval_episodes = j.at("eval_episodes").get<int>();
    c.net_layers = j.at("net_layers").get<int>();
    c.net_hidden = j.at("net_hidden").get<int>();
    c.flat_update_every = j.at("flat_update_every").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("rl config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace detail {

template <class S>
OptimizerConfig adam(double lr) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kAdam;
  cfg.learning_rate = lr;
  return cfg;
}

inline std::vector<int> trunk_sizes(int in, int layers, int hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  for (int i = 0; i < layers; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

}  // namespace detail

// Policy, twin critics with Polyak targets, and the temperature parameter.
// Each network owns a ParamSet so optimizer steps cannot touch a sibling.
// The policy trunk matches the skill prior's architecture exactly, which is
// what makes verbatim weight initialization from the prior possible.
template <class S>
struct Agent {
  RLConfig cfg;
  int obs_dim = 0;
  int latent_dim = 0;
  Mlp<S> policy_net;  // obs -> [mean, log_std] of the pre-squash Gaussian
  Mlp<S> critic_net;  // (obs, z) -> Q; one module reused by all four sets
  ParamSet<S> policy, q1, q2, target1, target2, alpha_set;
  std::int64_t updates = 0;

  Agent(const RLConfig& config, int obs, int latent, std::uint64_t seed)
      : cfg(config),
        obs_dim(obs),
        latent_dim(latent),
        policy_net("policy",
                   MlpConfig{detail::trunk_sizes(obs, config.net_layers,
                                                 config.net_hidden,
                                                 2 * latent)}),
        critic_net("q",
                   MlpConfig{detail::trunk_sizes(obs + latent,
                                                 config.net_layers,
                                                 config.net_hidden, 1)}) {
    cfg.validate();
    if (obs <= 0 || latent <= 0)
      throw UsageError("agent: dimensions must be positive");
    {
      Rng r = make_rng(seed, 10);
      policy_net.init(policy, r);
    }
    {
      Rng r = make_rng(seed, 11);
      critic_net.init(q1, r);
    }
    {
      Rng r = make_rng(seed, 12);
      critic_net.init(q2, r);
    }
    {
      Rng r = make_rng(seed, 13);
      critic_net.init(target1, r);
    }
    {
      Rng r = make_rng(seed, 14);
      critic_net.init(target2, r);
    }
    copy_values(q1, target1);
    copy_values(q2, target2);
    Param<S>& la = alpha_set.add("log_alpha", 1, 1);
    la.value.data[0] = S(std::log(config.alpha_init));
  }

  double alpha() const {
    return std::exp(double(alpha_set.at("log_alpha").value.data[0]));
  }

  static void copy_values(const ParamSet<S>& from, ParamSet<S>& to) {
    const auto& src = from.all();
    auto& dst = to.all();
    if (src.size() != dst.size())
      throw UsageError("agent: parameter set sizes disagree");
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i].value.rows != dst[i].value.rows ||
          src[i].value.cols != dst[i].value.cols)
        throw UsageError("agent: parameter shapes disagree");
      dst[i].value.data = src[i].value.data;
    }
  }
};

// Reference the policy is regularized toward.  A null model means the uniform
// distribution over the squashed box (-range, range)^d, i.e. plain entropy
// regularization up to the constant log-volume.
template <class S>
struct PriorHandle {
  skillmodel::SkillModel<S>* model = nullptr;
};

template <class S>
struct PolicyNodes {
  GaussianNodes<S> pre;   // pre-squash Gaussian [B x d], [B x d]
  SquashNodes<S> squash;  // reparameterized squashed draw + log-density
};

// Forward the policy on an already-scaled observation node and squash a
// reparameterized draw using the given noise node ([B x d] of N(0,1)).
template <class S>
PolicyNodes<S> policy_nodes(Graph<S>& g, Agent<S>& a, int scaled_obs,
                            int noise) {
  PolicyNodes<S> out;
  const int head = a.policy_net.forward(g, a.policy, scaled_obs);
  out.pre = gaussian_head(g, head, a.latent_dim);
  out.squash = tanh_squash_node(g, out.pre, noise, S(a.cfg.action_range));
  return out;
}

template <class S>
int critic_forward(Graph<S>& g, Agent<S>& a, ParamSet<S>& which, int scaled_obs,
                   int z) {
  return a.critic_net.forward(g, which, g.concat_cols(scaled_obs, z));
}

// Per-row divergence D(s) [B x 1] of the policy from the reference prior.
// Learned prior: analytic KL between the pre-squash Gaussians (both live in
// the same pre-squash space, so the squash correction cancels); the prior's
// outputs are detached so no gradient ever reaches it.  Uniform prior: the
// one-sample estimate log pi(z|s) + d*log(2*range), whose constant term has
// zero gradient -- the policy gradient is exactly max-entropy SAC's.
template <class S>
int divergence_nodes(Graph<S>& g, Agent<S>& a, const PolicyNodes<S>& pi,
                     const PriorHandle<S>& prior, int scaled_obs) {
  if (prior.model != nullptr) {
    GaussianNodes<S> p =
        skillmodel::prior_skill_nodes(g, *prior.model, scaled_obs);
    return gaussian_kl_node(g, pi.pre, stop_gradient(g, p));
  }
  const double log_volume =
      double(a.latent_dim) * std::log(2.0 * a.cfg.action_range);
  return g.add_scalar(pi.squash.log_density, S(log_volume));
}

// ---- target computation ----

// Q_bar_i = r_i + gamma * mask_i * (min_j Qt_j(s'_i, z'_i) - alpha * D(s'_i))
// with z'_i a squashed policy sample driven by the provided noise ([B x d]).
// Computed without gradients; nothing here can backpropagate anywhere.
template <class S>
std::vector<S> q_target_values(Agent<S>& a, const TransitionBatch& batch,
                               const PriorHandle<S>& prior,
                               const Tensor<S>& noise) {
  const int b = batch.batch_size;
  if (noise.rows != b || noise.cols != a.latent_dim)
    throw DimensionError("q_target: noise shape mismatch");
  Graph<S> g(false);
  const int s2 = g.input(skillmodel::scaled_observations<S>(
      batch.next_states.data(), b, a.obs_dim));
  const int nz = g.input(Tensor<S>(noise));
  PolicyNodes<S> pi = policy_nodes(g, a, s2, nz);
  const int div = divergence_nodes(g, a, pi, prior, s2);
  const int qt1 = critic_forward(g, a, a.target1, s2, pi.squash.action);
  const int qt2 = critic_forward(g, a, a.target2, s2, pi.squash.action);
  const int qmin = g.min_(qt1, qt2);
  const Tensor<S>& qv = g.value(qmin);
  const Tensor<S>& dv = g.value(div);
  const double alpha = a.alpha();
  std::vector<S> out(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const double backup = double(qv.at(i, 0)) - alpha * double(dv.at(i, 0));
    out[std::size_t(i)] =
        S(double(batch.rewards[std::size_t(i)]) +
          a.cfg.gamma * double(batch.bootstrap_mask[std::size_t(i)]) * backup);
  }
  return out;
}

namespace detail {

template <class S>
void check_finite_scalar(double v, const char* what) {
  if (!std::isfinite(v))
    throw NumericalError(std::string(what) + " became non-finite");
  (void)sizeof(S);
}

}  // namespace detail

// ---- critic update ----

struct CriticLossNodes {
  int q1 = -1;    // [B x 1]
  int q2 = -1;    // [B x 1]
  int loss = -1;  // scalar
};

// L = 1/2 mean (Q1 - Q_bar)^2 + 1/2 mean (Q2 - Q_bar)^2 with the targets as
// constants.  The twins share the loss graph but own disjoint parameters, so
// their gradients never mix.
template <class S>
CriticLossNodes critic_loss_nodes(Graph<S>& g, Agent<S>& a,
                                  const TransitionBatch& batch,
                                  const std::vector<S>& targets) {
  const int b = batch.batch_size;
  if (int(targets.size()) != b)
    throw DimensionError("critic update: targets size mismatch");
  const int s =
      g.input(skillmodel::scaled_observations<S>(batch.states.data(), b,
                                                 a.obs_dim));
  Tensor<S> zt(b, a.latent_dim, S(0));
  for (std::size_t i = 0; i < zt.data.size(); ++i)
    zt.data[i] = S(batch.skills[i]);
  const int z = g.input(std::move(zt));
  Tensor<S> tt(b, 1, S(0));
  for (int i = 0; i < b; ++i) tt.at(i, 0) = targets[std::size_t(i)];
  const int tgt = g.input(std::move(tt));
  CriticLossNodes out;
  out.q1 = critic_forward(g, a, a.q1, s, z);
  out.q2 = critic_forward(g, a, a.q2, s, z);
  out.loss = g.add(
      g.scale(g.mean_all(g.square(g.sub(out.q1, tgt))), S(0.5)),
      g.scale(g.mean_all(g.square(g.sub(out.q2, tgt))), S(0.5)));
  return out;
}

// One Adam step on both critics.  Returns the loss value.
template <class S>
double critic_update(Agent<S>& a, const TransitionBatch& batch,
                     const std::vector<S>& targets) {
  Graph<S> g(true);
  const CriticLossNodes nodes = critic_loss_nodes(g, a, batch, targets);
  const double value = double(g.scalar(nodes.loss));
  detail::check_finite_scalar<S>(value, "critic loss");
  a.q1.zero_grad();
  a.q2.zero_grad();
  g.backward(nodes.loss);
  optimizer_step(a.q1, detail::adam<S>(a.cfg.lr_q));
  optimizer_step(a.q2, detail::adam<S>(a.cfg.lr_q));
  return value;
}

// ---- policy update ----

struct PolicyUpdateStats {
  double loss = 0.0;      // mean(alpha * D - min Q)
  double mean_div = 0.0;  // mean divergence from the prior over the batch
};

template <class S>
struct PolicyLossNodes {
  PolicyNodes<S> pi;
  int div = -1;       // [B x 1] divergence from the prior
  int mean_div = -1;  // scalar
  int loss = -1;      // scalar: mean(alpha * D - min Q)
};

// L = mean (alpha * D(s) - min_i Q_i(s, z)), z drawn by reparameterization
// through the provided noise; alpha enters as a constant.
template <class S>
PolicyLossNodes<S> policy_loss_nodes(Graph<S>& g, Agent<S>& a,
                                     const TransitionBatch& batch,
                                     const PriorHandle<S>& prior,
                                     const Tensor<S>& noise) {
  const int b = batch.batch_size;
  if (noise.rows != b || noise.cols != a.latent_dim)
    throw DimensionError("policy update: noise shape mismatch");
  const int s =
      g.input(skillmodel::scaled_observations<S>(batch.states.data(), b,
                                                 a.obs_dim));
  const int nz = g.input(Tensor<S>(noise));
  PolicyLossNodes<S> out;
  out.pi = policy_nodes(g, a, s, nz);
  out.div = divergence_nodes(g, a, out.pi, prior, s);
  const int qn1 = critic_forward(g, a, a.q1, s, out.pi.squash.action);
  const int qn2 = critic_forward(g, a, a.q2, s, out.pi.squash.action);
  const int qmin = g.min_(qn1, qn2);
  out.loss = g.mean_all(g.sub(g.scale(out.div, S(a.alpha())), qmin));
  out.mean_div = g.mean_all(out.div);
  return out;
}

// One Adam step on the policy.  Critic parameters enter the graph but only
// the policy set is stepped; the critics' stale gradients are zeroed by
// their own next update.
template <class S>
PolicyUpdateStats policy_update(Agent<S>& a, const TransitionBatch& batch,
                                const PriorHandle<S>& prior,
                                const Tensor<S>& noise) {
  Graph<S> g(true);
  const PolicyLossNodes<S> nodes = policy_loss_nodes(g, a, batch, prior, noise);
  PolicyUpdateStats stats;
  stats.loss = double(g.scalar(nodes.loss));
  stats.mean_div = double(g.scalar(nodes.mean_div));
  detail::check_finite_scalar<S>(stats.loss, "policy loss");
  a.policy.zero_grad();
  g.backward(nodes.loss);
  optimizer_step(a.policy, detail::adam<S>(a.cfg.lr_pi));
  return stats;
}

// ---- temperature update ----

// One Adam step on log_alpha with gradient (delta - mean_div): divergence
// above the target delta raises alpha, below lowers it.  Returns the new
// alpha.  (Equivalent to descending L(alpha) = alpha * (delta - mean_div)
// in log space up to Adam's scale invariance.)
template <class S>
double alpha_update(Agent<S>& a, double mean_div) {
  detail::check_finite_scalar<S>(mean_div, "mean divergence");
  a.alpha_set.zero_grad();
  Param<S>& la = a.alpha_set.at("log_alpha");
  la.grad.data[0] = S(a.cfg.delta - mean_div);
  optimizer_step(a.alpha_set, detail::adam<S>(a.cfg.lr_alpha));
  return a.alpha();
}

// ---- target network update ----

// theta_t <- tau * theta + (1 - tau) * theta_t, elementwise, both twins.
// tau = 1 is a hard copy; tau = 0 leaves the targets unchanged.
template <class S>
void target_sync(Agent<S>& a, double tau_override) {
  if (tau_override < 0.0 || tau_override > 1.0)
    throw UsageError("target_sync: tau must lie in [0, 1]");
  const S tau = S(tau_override);
  auto polyak = [tau](ParamSet<S>& live, ParamSet<S>& targ) {
    auto& lp = live.all();
    auto& tp = targ.all();
    for (std::size_t i = 0; i < lp.size(); ++i) {
      auto& lv = lp[i].value.data;
      auto& tv = tp[i].value.data;
      for (std::size_t k = 0; k < lv.size(); ++k)
        tv[k] = tau * lv[k] + (S(1) - tau) * tv[k];
    }
  };
  polyak(a.q1, a.target1);
  polyak(a.q2, a.target2);
}

template <class S>
void target_sync(Agent<S>& a) {
  target_sync(a, a.cfg.tau);
}

// ---- prior initialization ----

// Copies the skill prior's weights verbatim into the policy.  Requires the
// architectures to match parameter-for-parameter (they do by construction
// when net_layers/net_hidden mirror the prior's shape); any mismatch is a
// usage error, not a silent partial copy.
template <class S>
void init_policy_from_prior(Agent<S>& a, skillmodel::SkillModel<S>& m) {
  auto& dst = a.policy.all();
  for (auto& p : dst) {
    const std::string suffix = p.name.substr(std::string("policy").size());
    const std::string src_name = "prior" + suffix;
    if (!m.params.has(src_name))
      throw UsageError("prior init: missing parameter " + src_name);
    const Param<S>& src = m.params.at(src_name);
    if (src.value.rows != p.value.rows || src.value.cols != p.value.cols)
      throw UsageError("prior init: architecture mismatch at " + src_name);
    p.value.data = src.value.data;
  }
}

// Copies a behavior-cloned policy (same parameter names and shapes) into the
// agent's policy set.
template <class S>
void init_policy_from_params(Agent<S>& a, const ParamSet<S>& source) {
  auto& dst = a.policy.all();
  for (auto& p : dst) {
    if (!source.has(p.name))
      throw UsageError("policy init: missing parameter " + p.name);
    const Param<S>& src = source.at(p.name);
    if (src.value.rows != p.value.rows || src.value.cols != p.value.cols)
      throw UsageError("policy init: shape mismatch at " + p.name);
    p.value.data = src.value.data;
  }
}

// ---- single-observation forward passes (rollouts, evaluation) ----

// Pre-squash policy Gaussian at one raw observation.
template <class S>
DiagGaussian<S> policy_gaussian(Agent<S>& a, const std::vector<float>& obs) {
  if (int(obs.size()) != a.obs_dim)
    throw DimensionError("policy: observation has wrong length");
  Graph<S> g(false);
  const int s =
      g.input(skillmodel::scaled_observations<S>(obs.data(), 1, a.obs_dim));
  const int head = a.policy_net.forward(g, a.policy, s);
  GaussianNodes<S> pre = gaussian_head(g, head, a.latent_dim);
  return skillmodel::row_gaussian(g, pre);
}

// Squashed policy action; zero noise gives the deterministic squashed mean.
template <class S>
std::vector<S> policy_act(Agent<S>& a, const std::vector<float>& obs,
                          const std::vector<S>& noise) {
  const DiagGaussian<S> pre = policy_gaussian(a, obs);
  return tanh_squash(pre, noise, a.cfg.action_range).first;
}

template <class S>
std::vector<S> policy_act_sampled(Agent<S>& a, const std::vector<float>& obs,
                                  Rng& rng) {
  std::vector<S> noise(std::size_t(a.latent_dim));
  for (auto& n : noise) n = S(normal(rng));
  return policy_act(a, obs, noise);
}

template <class S>
std::vector<S> policy_act_mean(Agent<S>& a, const std::vector<float>& obs) {
  return policy_act(a, obs, std::vector<S>(std::size_t(a.latent_dim), S(0)));
}

// ---- checkpointing ----

// Writes <prefix>.json (config + dimensions) and one .ckpt per parameter set.
template <class S>
void save_agent(const Agent<S>& a, const std::string& prefix) {
  nlohmann::json j{{"config", rl_config_to_json(a.cfg)},
                   {"obs_dim", a.obs_dim},
                   {"latent_dim", a.latent_dim},
                   {"updates", a.updates}};
  std::ofstream out(prefix + ".json");
  if (!out) throw IoError("cannot write " + prefix + ".json");
  out << j.dump(2) << "\n";
  out.close();
  if (!out) throw IoError("failed writing " + prefix + ".json");
  save_checkpoint(prefix + ".policy.ckpt", a.policy);
  save_checkpoint(prefix + ".q1.ckpt", a.q1);
  save_checkpoint(prefix + ".q2.ckpt", a.q2);
  save_checkpoint(prefix + ".target1.ckpt", a.target1);
  save_checkpoint(prefix + ".target2.ckpt", a.target2);
  save_checkpoint(prefix + ".alpha.ckpt", a.alpha_set);
}

template <class S>
Agent<S> load_agent(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw IoError("cannot read " + prefix + ".json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("agent checkpoint " + prefix + ".json: " + e.what());
  }
  int obs = 0, latent = 0;
  std::int64_t updates = 0;
  RLConfig cfg;
  try {
    cfg = rl_config_from_json(j.at("config"));
    obs = j.at("obs_dim").get<int>();
    latent = j.at("latent_dim").get<int>();
    updates = j.at("updates").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("agent checkpoint " + prefix + ".json: " + e.what());
  }
  Agent<S> a(cfg, obs, latent, 0);
  load_checkpoint(prefix + ".policy.ckpt", a.policy);
  load_checkpoint(prefix + ".q1.ckpt", a.q1);
  load_checkpoint(prefix + ".q2.ckpt", a.q2);
  load_checkpoint(prefix + ".target1.ckpt", a.target1);
  load_checkpoint(prefix + ".target2.ckpt", a.target2);
  load_checkpoint(prefix + ".alpha.ckpt", a.alpha_set);
  a.updates = updates;
  return a;
}

}  // namespace sprl::rl
