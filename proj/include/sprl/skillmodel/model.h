#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/sampling.h"
#include "sprl/nn/checkpoint.h"
#include "sprl/nn/distributions.h"
#include "sprl/nn/graph.h"
#include "sprl/nn/modules.h"
#include "sprl/nn/params.h"

namespace sprl::skillmodel {

// Fixed feature scaling applied to raw observations before any network sees
// them. Velocities are normalized by the speed limit and goal offsets are
// squashed so features stay in [-1, 1] regardless of maze size; the wall
// patch is already binary. The constants match the environment defaults and
// are baked in (rather than read from a config) so a skill prior trained on
// one dataset produces identical features when reused by the RL agent.
inline constexpr double kVelocityScale = 1.0 / 0.15;
inline constexpr double kGoalOffsetScale = 1.0 / 6.0;

inline void scale_observation_row(const float* raw, int obs_dim, float* out) {
  out[0] = float(double(raw[0]) * kVelocityScale);
  out[1] = float(double(raw[1]) * kVelocityScale);
  out[2] = float(std::tanh(double(raw[2]) * kGoalOffsetScale));
  out[3] = float(std::tanh(double(raw[3]) * kGoalOffsetScale));
  for (int i = 4; i < obs_dim; ++i) out[i] = raw[i];
}

template <class S, class F>
Tensor<S> tensor_from_flat(const std::vector<F>& flat, int rows, int cols) {
  if (int64_t(flat.size()) != int64_t(rows) * cols)
    throw DimensionError("tensor_from_flat: size does not match shape");
  Tensor<S> t(rows, cols);
  for (size_t i = 0; i < flat.size(); ++i) t.data[i] = S(flat[i]);
  return t;
}

// Builds the scaled network-input tensor for a batch of raw observation rows.
template <class S>
Tensor<S> scaled_observations(const float* raw, int batch, int obs_dim) {
  Tensor<S> t(batch, obs_dim);
  std::vector<float> row(static_cast<std::size_t>(obs_dim));
  for (int b = 0; b < batch; ++b) {
    scale_observation_row(raw + size_t(b) * obs_dim, obs_dim, row.data());
    for (int i = 0; i < obs_dim; ++i) t.at(b, i) = S(row[size_t(i)]);
  }
  return t;
}

struct SkillModelConfig {
  int horizon = 10;         // actions per skill segment
  int z_dim = 10;           // latent skill dimensionality
  double beta = 1e-2;       // weight on the latent regularization KL
  int obs_dim = 29;
  int action_dim = 2;
  // Actions are multiplied by this before the autoencoder sees them (and
  // divided back on decode), so reconstruction error lives on a ~unit scale.
  // Without it, beta * KL would dwarf the reconstruction term for small
  // action ranges and the optimal posterior would collapse onto N(0, I).
  // Default matches an action box of [-0.05, 0.05].
  double action_scale = 20.0;
  int encoder_hidden = 64;  // LSTM width, both directions of the autoencoder
  int decoder_hidden = 64;
  int prior_layers = 4;     // hidden layers in the state-conditioned prior
  int prior_hidden = 64;
  int batch_size = 16;
  long long train_steps = 30000;
  int eval_every = 500;     // validation cadence during training
  int val_batch_size = 256;
  OptimizerConfig optimizer{OptimizerKind::kRadam, 0.9, 0.999, 1e-3, 1e-8};

  void validate() const {
    if (horizon < 1) throw UsageError("skill model: horizon must be >= 1");
    if (z_dim < 1) throw UsageError("skill model: z_dim must be >= 1");
    if (beta < 0) throw UsageError("skill model: beta must be >= 0");
    if (obs_dim < 4)
      throw UsageError("skill model: obs_dim must be >= 4 (velocity + goal offset)");
    if (action_dim < 1) throw UsageError("skill model: action_dim must be >= 1");
    if (!(action_scale > 0))
      throw UsageError("skill model: action_scale must be positive");
    if (encoder_hidden < 1 || decoder_hidden < 1 || prior_hidden < 1)
      throw UsageError("skill model: hidden widths must be >= 1");
    if (prior_layers < 1) throw UsageError("skill model: prior_layers must be >= 1");
    if (batch_size < 1) throw UsageError("skill model: batch_size must be >= 1");
    if (train_steps < 1) throw UsageError("skill model: train_steps must be >= 1");
    if (eval_every < 1) throw UsageError("skill model: eval_every must be >= 1");
    if (val_batch_size < 1) throw UsageError("skill model: val_batch_size must be >= 1");
    sprl::validate(optimizer);
  }
};

inline nlohmann::json config_to_json(const SkillModelConfig& c) {
  return nlohmann::json{
      {"horizon", c.horizon},
      {"z_dim", c.z_dim},
      {"beta", c.beta},
      {"obs_dim", c.obs_dim},
      {"action_dim", c.action_dim},
      {"action_scale", c.action_scale},
      {"encoder_hidden", c.encoder_hidden},
      {"decoder_hidden", c.decoder_hidden},
      {"prior_layers", c.prior_layers},
      {"prior_hidden", c.prior_hidden},
      {"batch_size", c.batch_size},
      {"train_steps", c.train_steps},
      {"eval_every", c.eval_every},
      {"val_batch_size", c.val_batch_size},
      {"optimizer",
       {{"kind", c.optimizer.kind == OptimizerKind::kRadam ? "radam" : "adam"},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"learning_rate", c.optimizer.learning_rate},
        {"epsilon", c.optimizer.epsilon}}},
  };
}

inline SkillModelConfig config_from_json(const nlohmann::json& j) {
  SkillModelConfig c;
  try {
    c.horizon = j.at("horizon").get<int>();
    c.z_dim = j.at("z_dim").get<int>();
    c.beta = j.at("beta").get<double>();
    c.obs_dim = j.at("obs_dim").get<int>();
    c.action_dim = j.at("action_dim").get<int>();
    c.action_scale = j.at("action_scale").get<double>();
    c.encoder_hidden = j.at("encoder_hidden").get<int>();
    c.decoder_hidden = j.at("decoder_hidden").get<int>();
    c.prior_layers = j.at("prior_layers").get<int>();
    c.prior_hidden = j.at("prior_hidden").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.train_steps = j.at("train_steps").get<long long>();
    c.eval_every = j.at("eval_every").get<int>();
    c.val_batch_size = j.at("val_batch_size").get<int>();
    const auto& opt = j.at("optimizer");
    const std::string kind = opt.at("kind").get<std::string>();
    if (kind == "radam")
      c.optimizer.kind = OptimizerKind::kRadam;
    else if (kind == "adam")
      c.optimizer.kind = OptimizerKind::kAdam;
    else
      throw IoError("skill model config: unknown optimizer kind '" + kind + "'");
    c.optimizer.beta1 = opt.at("beta1").get<double>();
    c.optimizer.beta2 = opt.at("beta2").get<double>();
    c.optimizer.learning_rate = opt.at("learning_rate").get<double>();
    c.optimizer.epsilon = opt.at("epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("skill model config: ") + e.what());
  }
  c.validate();
  return c;
}

// Latent-variable model over fixed-length action segments plus a
// state-conditioned prior over the latent, all sharing one parameter set:
//   encoder   LSTM over the H actions -> diagonal Gaussian q(z | a_0..H-1)
//   decoder   LSTM fed z at every step -> H reconstructed action means
//   prior     MLP from the (scaled) first observation -> Gaussian p(z | s)
// The prior is a plain MLP head so a downstream policy can start from a
// verbatim copy of its weights.
template <class S>
struct SkillModel {
  SkillModelConfig cfg;
  ParamSet<S> params;
  Lstm<S> encoder;
  Mlp<S> encoder_head;
  Lstm<S> decoder;
  Mlp<S> decoder_head;
  Mlp<S> prior;

  SkillModel(SkillModelConfig config, std::uint64_t seed)
      : cfg(std::move(config)),
        encoder("encoder", LstmConfig{cfg.action_dim, cfg.encoder_hidden}),
        encoder_head("encoder_head",
                     MlpConfig{{cfg.encoder_hidden, 2 * cfg.z_dim}}),
        decoder("decoder", LstmConfig{cfg.z_dim, cfg.decoder_hidden}),
        decoder_head("decoder_head",
                     MlpConfig{{cfg.decoder_hidden, cfg.action_dim}}),
        prior("prior", MlpConfig{prior_sizes(cfg)}) {
    cfg.validate();
    Rng rng = make_rng(seed, 0);
    encoder.init(params, rng);
    encoder_head.init(params, rng);
    decoder.init(params, rng);
    decoder_head.init(params, rng);
    prior.init(params, rng);
  }

  static std::vector<int> prior_sizes(const SkillModelConfig& c) {
    std::vector<int> sizes{c.obs_dim};
    for (int i = 0; i < c.prior_layers; ++i) sizes.push_back(c.prior_hidden);
    sizes.push_back(2 * c.z_dim);
    return sizes;
  }
};

// q(z | a_0..H-1) from a [batch x H*action_dim] step-major action node. The
// node must already hold actions multiplied by cfg.action_scale; the
// convenience wrappers below handle that.
template <class S>
GaussianNodes<S> encode_skill_nodes(Graph<S>& g, SkillModel<S>& m, int action_seqs) {
  const int a = m.cfg.action_dim;
  const int h = m.cfg.horizon;
  if (g.value(action_seqs).cols != h * a)
    throw DimensionError("encode_skill: expected " + std::to_string(h * a) +
                         " action columns, got " +
                         std::to_string(g.value(action_seqs).cols));
  std::vector<int> steps;
  steps.reserve(size_t(h));
  for (int t = 0; t < h; ++t)
    steps.push_back(g.slice_cols(action_seqs, t * a, (t + 1) * a));
  const std::vector<int> hidden = m.encoder.unroll(g, m.params, steps);
  const int head = m.encoder_head.forward(g, m.params, hidden.back());
  return gaussian_head(g, head, m.cfg.z_dim);
}

// Decoded action means in scaled units, [batch x H*action_dim], from a
// [batch x z_dim] latent node; the latent is fed to the decoder LSTM at
// every step.
template <class S>
int decode_skill_nodes(Graph<S>& g, SkillModel<S>& m, int z) {
  if (g.value(z).cols != m.cfg.z_dim)
    throw DimensionError("decode_skill: expected " + std::to_string(m.cfg.z_dim) +
                         " latent columns, got " + std::to_string(g.value(z).cols));
  typename Lstm<S>::State state = m.decoder.initial_state(g, g.value(z).rows);
  int all = -1;
  for (int t = 0; t < m.cfg.horizon; ++t) {
    state = m.decoder.step(g, m.params, z, state);
    const int out = m.decoder_head.forward(g, m.params, state.h);
    all = (t == 0) ? out : g.concat_cols(all, out);
  }
  return all;
}

// p(z | s) from an already-scaled [batch x obs_dim] observation node.
template <class S>
GaussianNodes<S> prior_skill_nodes(Graph<S>& g, SkillModel<S>& m, int scaled_obs) {
  if (g.value(scaled_obs).cols != m.cfg.obs_dim)
    throw DimensionError("skill prior: expected " + std::to_string(m.cfg.obs_dim) +
                         " observation columns, got " +
                         std::to_string(g.value(scaled_obs).cols));
  const int head = m.prior.forward(g, m.params, scaled_obs);
  return gaussian_head(g, head, m.cfg.z_dim);
}

// Single-row convenience wrappers (no gradients), used by tests and rollouts.
template <class S>
DiagGaussian<S> row_gaussian(const Graph<S>& g, const GaussianNodes<S>& n) {
  const Tensor<S>& mu = g.value(n.mean);
  const Tensor<S>& ls = g.value(n.log_std);
  return DiagGaussian<S>{mu.data, ls.data};
}

// Raw environment-unit actions in, posterior out.
template <class S>
DiagGaussian<S> encode_skill(SkillModel<S>& m, const std::vector<float>& action_seq) {
  if (int(action_seq.size()) != m.cfg.horizon * m.cfg.action_dim)
    throw DimensionError("encode_skill: action sequence has wrong length");
  Graph<S> g(false);
  Tensor<S> t = tensor_from_flat<S>(action_seq, 1, m.cfg.horizon * m.cfg.action_dim);
  for (auto& x : t.data) x *= S(m.cfg.action_scale);
  const int x = g.input(std::move(t));
  return row_gaussian(g, encode_skill_nodes(g, m, x));
}

// Latent in, raw environment-unit action sequence out.
template <class S>
std::vector<S> decode_skill(SkillModel<S>& m, const std::vector<S>& z) {
  if (int(z.size()) != m.cfg.z_dim)
    throw DimensionError("decode_skill: latent has wrong length");
  Graph<S> g(false);
  const int zn = g.input(tensor_from_flat<S>(z, 1, m.cfg.z_dim));
  std::vector<S> out = g.value(decode_skill_nodes(g, m, zn)).data;
  for (auto& x : out) x /= S(m.cfg.action_scale);
  return out;
}

// Raw (unscaled) single observation in, prior Gaussian out.
template <class S>
DiagGaussian<S> prior_forward(SkillModel<S>& m, const std::vector<float>& obs) {
  if (int(obs.size()) != m.cfg.obs_dim)
    throw DimensionError("skill prior: observation has wrong length");
  Graph<S> g(false);
  const int x = g.input(scaled_observations<S>(obs.data(), 1, m.cfg.obs_dim));
  return row_gaussian(g, prior_skill_nodes(g, m, x));
}

template <class S>
std::vector<S> sample_skill_from_prior(SkillModel<S>& m,
                                       const std::vector<float>& obs, Rng& rng) {
  const DiagGaussian<S> p = prior_forward(m, obs);
  std::vector<S> z(p.mean.size());
  for (size_t i = 0; i < z.size(); ++i)
    z[i] = p.mean[i] + std::exp(p.log_std[i]) * S(normal(rng));
  return z;
}

struct LossBreakdown {
  double reconstruction = 0;
  double regularization_kl = 0;
  double prior_kl = 0;
  double total = 0;
};

template <class S>
struct SkillLossNodes {
  int reconstruction = -1;   // scalar node: mean squared error, scaled units
  int regularization_kl = -1;  // scalar node: mean KL(q || N(0, I)) per segment
  int prior_kl = -1;         // scalar node: mean KL(sg(q) || p(z|s)) per segment
  int total = -1;            // reconstruction + beta * regularization + prior
  GaussianNodes<S> posterior;
  GaussianNodes<S> prior;
};

// Builds the full training loss for one segment batch. `noise` must be a
// [batch x z_dim] standard-normal draw (the reparameterized sample). The
// posterior is detached before the prior term so that term trains only the
// prior network, while reconstruction + regularization train only the
// autoencoder.
template <class S>
SkillLossNodes<S> skill_model_loss_nodes(Graph<S>& g, SkillModel<S>& m,
                                         const dataset::SegmentBatch& batch,
                                         const Tensor<S>& noise) {
  if (batch.obs_dim != m.cfg.obs_dim || batch.action_dim != m.cfg.action_dim ||
      batch.horizon != m.cfg.horizon)
    throw DimensionError("skill model loss: batch shape does not match config");
  if (noise.rows != batch.batch_size || noise.cols != m.cfg.z_dim)
    throw DimensionError("skill model loss: noise must be [batch x z_dim]");

  const int b = batch.batch_size;
  Tensor<S> action_t = tensor_from_flat<S>(batch.action_seqs, b,
                                           m.cfg.horizon * m.cfg.action_dim);
  for (auto& x : action_t.data) x *= S(m.cfg.action_scale);
  const int actions = g.input(std::move(action_t));
  const int states =
      g.input(scaled_observations<S>(batch.states.data(), b, m.cfg.obs_dim));

  SkillLossNodes<S> out;
  out.posterior = encode_skill_nodes(g, m, actions);
  const int z = rsample_node(g, out.posterior, g.input(Tensor<S>(noise)));
  const int decoded = decode_skill_nodes(g, m, z);
  out.reconstruction = g.mean_all(g.square(g.sub(decoded, actions)));
  out.regularization_kl = g.mean_all(standard_kl_node(g, out.posterior));
  out.prior = prior_skill_nodes(g, m, states);
  out.prior_kl =
      g.mean_all(gaussian_kl_node(g, stop_gradient(g, out.posterior), out.prior));
  out.total = g.add(g.add(out.reconstruction, g.scale(out.regularization_kl,
                                                      S(m.cfg.beta))),
                    out.prior_kl);
  return out;
}

template <class S>
LossBreakdown read_breakdown(const Graph<S>& g, const SkillLossNodes<S>& n) {
  LossBreakdown b;
  b.reconstruction = double(g.scalar(n.reconstruction));
  b.regularization_kl = double(g.scalar(n.regularization_kl));
  b.prior_kl = double(g.scalar(n.prior_kl));
  b.total = double(g.scalar(n.total));
  return b;
}

// Loss evaluation without gradients. Zero latent noise makes it
// deterministic: the decoder sees the posterior mean.
template <class S>
LossBreakdown evaluate_skill_model(SkillModel<S>& m, const dataset::SegmentBatch& batch) {
  Graph<S> g(false);
  const Tensor<S> noise(batch.batch_size, m.cfg.z_dim);
  return read_breakdown(g, skill_model_loss_nodes(g, m, batch, noise));
}

// Persistence: `<prefix>.ckpt` holds the parameters, `<prefix>.json` the
// config needed to rebuild the architecture.
template <class S>
void save_skill_model(const SkillModel<S>& m, const std::string& prefix) {
  std::ofstream cfg(prefix + ".json", std::ios::trunc);
  if (!cfg) throw IoError("cannot open " + prefix + ".json for writing");
  cfg << config_to_json(m.cfg).dump(2) << '\n';
  if (!cfg.flush()) throw IoError("failed writing " + prefix + ".json");
  save_checkpoint(prefix + ".ckpt", m.params);
}

template <class S>
SkillModel<S> load_skill_model(const std::string& prefix) {
  std::ifstream cfg(prefix + ".json");
  if (!cfg) throw IoError("cannot open " + prefix + ".json");
  nlohmann::json j;
  try {
    cfg >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("skill model config: ") + e.what());
  }
  SkillModel<S> m(config_from_json(j), 0);
  load_checkpoint(prefix + ".ckpt", m.params);
  return m;
}

}  // namespace sprl::skillmodel
