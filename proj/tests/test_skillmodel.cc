// Tests for the skill autoencoder + state-conditioned skill prior: loss-term
// semantics (oracle KL, stop-gradient partitioning, exact zeros at a perfect
// fit), learning on a synthetic two-skill corpus, and persistence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/dataset.h"
#include "sprl/dataset/sampling.h"
#include "sprl/skillmodel/model.h"
#include "sprl/skillmodel/train.h"

namespace {

using sprl::DimensionError;
using sprl::IoError;
using sprl::NumericalError;
using sprl::Rng;
using sprl::UsageError;
using sprl::make_rng;
using sprl::normal;
using sprl::uniform;
namespace ds = sprl::dataset;
namespace sm = sprl::skillmodel;

std::string temp_prefix(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Synthetic corpus with exactly two behaviors. Even trajectories push +x,
// odd trajectories push -x, each with a small per-trajectory magnitude
// jitter; the observation's goal-offset feature carries the sign (plus
// jitter), so the starting state fully determines which skill follows.
ds::Dataset two_skill_corpus(int per_type, int traj_len, std::uint64_t seed) {
  ds::Dataset data;
  data.meta.obs_dim = 4;
  data.meta.action_dim = 2;
  data.meta.maze_width = 8;
  data.meta.maze_height = 8;
  data.meta.door_density = 0.25;
  Rng rng = make_rng(seed);
  for (int i = 0; i < 2 * per_type; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    const double ax = sign * (0.04 + 0.004 * uniform(rng, -1.0, 1.0));
    const double ay = 0.004 * uniform(rng, -1.0, 1.0);
    const double gx = sign * (6.0 + 1.5 * uniform(rng, -1.0, 1.0));
    sprl::envs::Trajectory t;
    t.obs_dim = 4;
    t.action_dim = 2;
    t.reached_goal = true;
    t.layout_seed = std::uint64_t(i);
    t.source_tag = "expert";
    for (int s = 0; s <= traj_len; ++s)
      t.observations.insert(t.observations.end(), {0.f, 0.f, float(gx), 0.f});
    for (int s = 0; s < traj_len; ++s)
      t.actions.insert(t.actions.end(), {float(ax), float(ay)});
    data.trajectories.push_back(std::move(t));
  }
  return data;
}

sm::SkillModelConfig tiny_config(double beta = 1e-2, long long steps = 2500) {
  sm::SkillModelConfig c;
  c.horizon = 10;
  c.z_dim = 2;
  c.beta = beta;
  c.obs_dim = 4;
  c.action_dim = 2;
  c.encoder_hidden = 16;
  c.decoder_hidden = 16;
  c.prior_layers = 2;
  c.prior_hidden = 32;
  c.batch_size = 16;
  c.train_steps = steps;
  c.eval_every = 250;
  c.val_batch_size = 128;
  return c;
}

// First H actions of trajectory `i`, flattened step-major.
std::vector<float> segment_actions(const ds::Dataset& data, int i, int horizon) {
  const auto& t = data.trajectories[std::size_t(i)];
  return {t.actions.begin(), t.actions.begin() + horizon * t.action_dim};
}

std::vector<float> first_observation(const ds::Dataset& data, int i) {
  const auto& t = data.trajectories[std::size_t(i)];
  return {t.observations.begin(), t.observations.begin() + t.obs_dim};
}

// Closed-form KL between diagonal Gaussians, evaluated in double as an
// independent oracle for the graph-built loss terms.
template <class S>
double diag_kl(const std::vector<S>& mq, const std::vector<S>& lq,
               const std::vector<S>& mp, const std::vector<S>& lp) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mq.size(); ++i) {
    const double sq = std::exp(double(lq[i]));
    const double sp = std::exp(double(lp[i]));
    const double d = double(mq[i]) - double(mp[i]);
    kl += double(lp[i]) - double(lq[i]) + (sq * sq + d * d) / (2.0 * sp * sp) - 0.5;
  }
  return kl;
}

ds::SegmentBatch zero_batch(int batch, int obs_dim, int action_dim, int horizon) {
  ds::SegmentBatch b;
  b.batch_size = batch;
  b.obs_dim = obs_dim;
  b.action_dim = action_dim;
  b.horizon = horizon;
  b.states.assign(std::size_t(batch) * obs_dim, 0.f);
  b.action_seqs.assign(std::size_t(batch) * horizon * action_dim, 0.f);
  return b;
}

}  // namespace

TEST_CASE("skill model config validation and json round trip") {
  sm::SkillModelConfig c = tiny_config();
  CHECK_NOTHROW(c.validate());

  auto bad = c;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.z_dim = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.beta = -0.5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.obs_dim = 3;  // needs velocity + goal offset at minimum
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.action_scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.optimizer.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);

  const sm::SkillModelConfig back = sm::config_from_json(sm::config_to_json(c));
  CHECK(back.horizon == c.horizon);
  CHECK(back.z_dim == c.z_dim);
  CHECK(back.beta == c.beta);
  CHECK(back.obs_dim == c.obs_dim);
  CHECK(back.action_dim == c.action_dim);
  CHECK(back.action_scale == c.action_scale);
  CHECK(back.encoder_hidden == c.encoder_hidden);
  CHECK(back.prior_layers == c.prior_layers);
  CHECK(back.train_steps == c.train_steps);
  CHECK(back.optimizer.kind == c.optimizer.kind);
  CHECK(back.optimizer.learning_rate == c.optimizer.learning_rate);

  auto j = sm::config_to_json(c);
  j["optimizer"]["kind"] = "sgd";
  CHECK_THROWS_AS(sm::config_from_json(j), IoError);
  j = sm::config_to_json(c);
  j.erase("z_dim");
  CHECK_THROWS_AS(sm::config_from_json(j), IoError);
}

TEST_CASE("observation scaling maps velocity and goal offsets into unit range") {
  const float raw[6] = {0.15f, -0.15f, 6.f, -600.f, 1.f, 0.f};
  float out[6];
  sm::scale_observation_row(raw, 6, out);
  CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out[1] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out[2] == doctest::Approx(std::tanh(1.0)).epsilon(1e-6));
  CHECK(out[3] == doctest::Approx(-1.0).epsilon(1e-4));  // saturated
  CHECK(out[4] == 1.f);  // patch cells pass through untouched
  CHECK(out[5] == 0.f);
}

TEST_CASE("skill model construction is deterministic in the seed") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<float> a(cfg, 42), b(cfg, 42), c(cfg, 43);

  const auto corpus = two_skill_corpus(4, 12, 9);
  const auto seq = segment_actions(corpus, 0, cfg.horizon);
  const auto qa = sm::encode_skill(a, seq);
  const auto qb = sm::encode_skill(b, seq);
  const auto qc = sm::encode_skill(c, seq);
  CHECK(qa.mean == qb.mean);
  CHECK(qa.log_std == qb.log_std);
  CHECK(qa.mean != qc.mean);

  const auto obs = first_observation(corpus, 0);
  CHECK(sm::prior_forward(a, obs).mean == sm::prior_forward(b, obs).mean);

  // Wrong input lengths are rejected up front.
  CHECK_THROWS_AS(sm::encode_skill(a, std::vector<float>(cfg.horizon, 0.f)),
                  DimensionError);
  CHECK_THROWS_AS(sm::decode_skill(a, std::vector<float>(cfg.z_dim + 1, 0.f)),
                  DimensionError);
  CHECK_THROWS_AS(sm::prior_forward(a, std::vector<float>(cfg.obs_dim - 1, 0.f)),
                  DimensionError);
}

TEST_CASE("posterior and prior log-std land inside the clamp bounds") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<float> m(cfg, 1);

  // Force the log-std halves of both heads far outside the legal range; the
  // clamp must pin them to the bounds exactly.
  auto& eb = m.params.at("encoder_head.b0").value;
  auto& pb = m.params.at("prior.b" + std::to_string(cfg.prior_layers)).value;
  for (int i = 0; i < cfg.z_dim; ++i) {
    eb.at(0, cfg.z_dim + i) = 50.f;
    pb.at(0, cfg.z_dim + i) = -50.f;
  }

  const auto corpus = two_skill_corpus(2, 12, 3);
  const auto q = sm::encode_skill(m, segment_actions(corpus, 0, cfg.horizon));
  const auto p = sm::prior_forward(m, first_observation(corpus, 0));
  for (int i = 0; i < cfg.z_dim; ++i) {
    CHECK(q.log_std[std::size_t(i)] == float(sprl::kLogStdMax));
    CHECK(p.log_std[std::size_t(i)] == float(sprl::kLogStdMin));
  }
}

TEST_CASE("loss terms match closed-form oracles and recompose into the total") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<double> m(cfg, 7);
  const auto corpus = two_skill_corpus(20, 12, 11);
  ds::SegmentSampler sampler(corpus, cfg.horizon);
  Rng rng = make_rng(5);
  const ds::SegmentBatch batch = sampler.sample(8, rng);
  sprl::Tensor<double> noise(8, cfg.z_dim);
  for (auto& x : noise.data) x = normal(rng);

  sprl::Graph<double> g(false);
  const auto nodes = sm::skill_model_loss_nodes(g, m, batch, noise);
  const auto b = sm::read_breakdown(g, nodes);

  // Oracle: recompute every term per row from the head outputs in double.
  const auto& qm = g.value(nodes.posterior.mean);
  const auto& ql = g.value(nodes.posterior.log_std);
  const auto& pm = g.value(nodes.prior.mean);
  const auto& pl = g.value(nodes.prior.log_std);
  double reg = 0.0, pri = 0.0;
  for (int r = 0; r < 8; ++r) {
    std::vector<double> mq, lq, mp, lp, zero(std::size_t(cfg.z_dim), 0.0);
    for (int i = 0; i < cfg.z_dim; ++i) {
      mq.push_back(qm.at(r, i));
      lq.push_back(ql.at(r, i));
      mp.push_back(pm.at(r, i));
      lp.push_back(pl.at(r, i));
    }
    reg += diag_kl(mq, lq, zero, zero);
    pri += diag_kl(mq, lq, mp, lp);
  }
  reg /= 8.0;
  pri /= 8.0;
  CHECK(b.regularization_kl == doctest::Approx(reg).epsilon(1e-10));
  CHECK(b.prior_kl == doctest::Approx(pri).epsilon(1e-10));

  // Oracle: reconstruction equals the mean squared error, in scaled action
  // units, of a decode of the reparameterized sample. decode_skill returns
  // raw units, so both sides are re-multiplied by action_scale.
  double mse = 0.0;
  for (int r = 0; r < 8; ++r) {
    std::vector<double> z;
    for (int i = 0; i < cfg.z_dim; ++i)
      z.push_back(qm.at(r, i) + std::exp(ql.at(r, i)) * noise.at(r, i));
    const std::vector<double> dec = sm::decode_skill(m, z);
    for (int i = 0; i < cfg.horizon * cfg.action_dim; ++i) {
      const double d =
          cfg.action_scale *
          (dec[std::size_t(i)] -
           double(batch.action_seqs[std::size_t(r) * cfg.horizon * cfg.action_dim +
                                    std::size_t(i)]));
      mse += d * d;
    }
  }
  mse /= 8.0 * cfg.horizon * cfg.action_dim;
  CHECK(b.reconstruction == doctest::Approx(mse).epsilon(1e-10));

  CHECK(b.total ==
        doctest::Approx(b.reconstruction + cfg.beta * b.regularization_kl +
                        b.prior_kl)
            .epsilon(1e-10));
}

TEST_CASE("a perfectly fitting model scores exactly zero on every loss term") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<float> m(cfg, 2);
  for (auto& p : m.params.all())
    std::fill(p.value.data.begin(), p.value.data.end(), 0.f);

  // All-zero parameters decode the all-zero batch exactly, and both the
  // posterior and the prior become N(0, I): every KL is identically zero.
  const auto batch = zero_batch(6, cfg.obs_dim, cfg.action_dim, cfg.horizon);
  sprl::Graph<float> g(false);
  const sprl::Tensor<float> noise(6, cfg.z_dim);
  const auto b = sm::read_breakdown(g, sm::skill_model_loss_nodes(g, m, batch, noise));
  CHECK(b.reconstruction == 0.0);
  CHECK(b.regularization_kl == 0.0);
  CHECK(b.prior_kl == 0.0);
  CHECK(b.total == 0.0);
}

TEST_CASE("prior term trains only the prior: detached-posterior gradients are exact zeros") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<float> m(cfg, 13);
  const auto corpus = two_skill_corpus(10, 12, 17);
  ds::SegmentSampler sampler(corpus, cfg.horizon);
  Rng rng = make_rng(21);
  const ds::SegmentBatch batch = sampler.sample(16, rng);
  sprl::Tensor<float> noise(16, cfg.z_dim);
  for (auto& x : noise.data) x = float(normal(rng));

  const auto grad_norms = [&](int loss_node, sprl::Graph<float>& g) {
    m.params.zero_grad();
    g.backward(loss_node);
    double enc = 0, dec = 0, pri = 0;
    bool enc_zero = true, dec_zero = true;
    for (const auto& p : m.params.all()) {
      double s = 0;
      bool all_zero = true;
      for (float v : p.grad.data) {
        s += double(v) * v;
        all_zero = all_zero && v == 0.f;
      }
      if (p.name.rfind("prior.", 0) == 0) {
        pri += s;
      } else if (p.name.rfind("encoder", 0) == 0) {
        enc += s;
        enc_zero = enc_zero && all_zero;
      } else {
        dec += s;
        dec_zero = dec_zero && all_zero;
      }
    }
    return std::tuple{enc, dec, pri, enc_zero, dec_zero};
  };

  {
    // Backprop through the prior KL alone: the posterior inside it is
    // detached, so encoder and decoder gradients are bitwise zero.
    sprl::Graph<float> g(true);
    const auto nodes = sm::skill_model_loss_nodes(g, m, batch, noise);
    const auto [enc, dec, pri, enc_zero, dec_zero] = grad_norms(nodes.prior_kl, g);
    CHECK(enc == 0.0);
    CHECK(dec == 0.0);
    CHECK(enc_zero);
    CHECK(dec_zero);
    CHECK(pri > 0.0);
  }
  {
    // Reconstruction alone touches the autoencoder but never the prior.
    sprl::Graph<float> g(true);
    const auto nodes = sm::skill_model_loss_nodes(g, m, batch, noise);
    const auto [enc, dec, pri, enc_zero, dec_zero] = grad_norms(nodes.reconstruction, g);
    (void)enc_zero;
    (void)dec_zero;
    CHECK(enc > 0.0);
    CHECK(dec > 0.0);
    CHECK(pri == 0.0);
  }
  {
    // The composite loss reaches every parameter group.
    sprl::Graph<float> g(true);
    const auto nodes = sm::skill_model_loss_nodes(g, m, batch, noise);
    const auto [enc, dec, pri, enc_zero, dec_zero] = grad_norms(nodes.total, g);
    (void)enc_zero;
    (void)dec_zero;
    CHECK(enc > 0.0);
    CHECK(dec > 0.0);
    CHECK(pri > 0.0);
  }
}

TEST_CASE("reparameterized sample with zero noise equals the posterior mean") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<float> m(cfg, 3);
  const auto corpus = two_skill_corpus(4, 12, 19);
  ds::SegmentSampler sampler(corpus, cfg.horizon);
  Rng rng = make_rng(2);
  const ds::SegmentBatch batch = sampler.sample(5, rng);

  sprl::Graph<float> g(false);
  sprl::Tensor<float> scaled =
      sm::tensor_from_flat<float>(batch.action_seqs, 5, cfg.horizon * cfg.action_dim);
  for (auto& x : scaled.data) x *= float(cfg.action_scale);
  const int actions = g.input(std::move(scaled));
  const auto q = sm::encode_skill_nodes(g, m, actions);
  const sprl::Tensor<float> zero_noise(5, cfg.z_dim);
  const int z = sprl::rsample_node(g, q, g.input(zero_noise));
  CHECK(g.value(z).data == g.value(q.mean).data);
}

TEST_CASE("prior sampling matches the prior's own moments") {
  const sm::SkillModelConfig cfg = tiny_config();
  sm::SkillModel<float> m(cfg, 29);
  const auto corpus = two_skill_corpus(2, 12, 23);
  const auto obs = first_observation(corpus, 0);
  const auto p = sm::prior_forward(m, obs);

  const int n = 200000;
  Rng rng = make_rng(31);
  std::vector<double> sum(std::size_t(cfg.z_dim), 0.0);
  std::vector<double> sum_sq(std::size_t(cfg.z_dim), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto z = sm::sample_skill_from_prior(m, obs, rng);
    for (int d = 0; d < cfg.z_dim; ++d) {
      sum[std::size_t(d)] += z[std::size_t(d)];
      sum_sq[std::size_t(d)] += double(z[std::size_t(d)]) * z[std::size_t(d)];
    }
  }
  for (int d = 0; d < cfg.z_dim; ++d) {
    const double mu = p.mean[std::size_t(d)];
    const double sigma = std::exp(double(p.log_std[std::size_t(d)]));
    const double mean = sum[std::size_t(d)] / n;
    const double var = sum_sq[std::size_t(d)] / n - mean * mean;
    CHECK(std::abs(mean - mu) <= 0.01 * sigma);          // ~4.5 standard errors
    CHECK(std::abs(var / (sigma * sigma) - 1.0) <= 0.02);
  }
}

TEST_CASE("training separates the two skills and the prior predicts them from state") {
  const auto corpus = two_skill_corpus(60, 12, 101);
  const sm::SkillModelConfig cfg = tiny_config(1e-2, 2500);
  const std::string prefix = temp_prefix("sprl_skill_twoskill");
  const sm::SkillTrainResult result =
      sm::train_skill_model<float>(corpus, cfg, prefix, 77);

  // Validation loss must have dropped substantially and the latent must not
  // have collapsed onto the unit prior.
  CHECK(result.final_val.total < 0.5 * result.first_val.total);
  CHECK(result.final_val.regularization_kl > sm::kCollapseThresholdNats);
  CHECK(!result.collapsed);
  CHECK(result.steps_run == cfg.train_steps);

  sm::SkillModel<float> m = sm::load_skill_model<float>(prefix);

  // Posterior means of the two behaviors separate along the line between the
  // class centroids by more than three pooled within-class deviations.
  const auto held_out = two_skill_corpus(50, 12, 909);
  std::vector<std::vector<float>> mean_a, mean_b;
  for (int i = 0; i < 100; ++i) {
    const auto q = sm::encode_skill(m, segment_actions(held_out, i, cfg.horizon));
    (i % 2 == 0 ? mean_a : mean_b).push_back(q.mean);
  }
  std::vector<double> ca(std::size_t(cfg.z_dim), 0.0), cb = ca;
  for (const auto& v : mean_a)
    for (int d = 0; d < cfg.z_dim; ++d) ca[std::size_t(d)] += v[std::size_t(d)] / 50.0;
  for (const auto& v : mean_b)
    for (int d = 0; d < cfg.z_dim; ++d) cb[std::size_t(d)] += v[std::size_t(d)] / 50.0;
  double gap_sq = 0.0;
  for (int d = 0; d < cfg.z_dim; ++d)
    gap_sq += (ca[std::size_t(d)] - cb[std::size_t(d)]) * (ca[std::size_t(d)] - cb[std::size_t(d)]);
  const double gap = std::sqrt(gap_sq);
  const auto axis_var = [&](const std::vector<std::vector<float>>& ms,
                            const std::vector<double>& c) {
    double var = 0.0;
    for (const auto& v : ms) {
      double proj = 0.0;
      for (int d = 0; d < cfg.z_dim; ++d)
        proj += (double(v[std::size_t(d)]) - c[std::size_t(d)]) *
                (ca[std::size_t(d)] - cb[std::size_t(d)]) / gap;
      var += proj * proj / double(ms.size());
    }
    return var;
  };
  const double pooled =
      std::sqrt(0.5 * (axis_var(mean_a, ca) + axis_var(mean_b, cb)));
  INFO("centroid gap " << gap << " pooled sigma " << pooled);
  CHECK(gap > 3.0 * pooled);

  // Decoding the posterior mean reproduces the actions to within 10% of the
  // action range (actions live in [-0.05, 0.05], so 0.01).
  double worst_mean_err = 0.0;
  for (int i = 0; i < 40; ++i) {
    const auto seq = segment_actions(held_out, i, cfg.horizon);
    const auto q = sm::encode_skill(m, seq);
    const auto dec = sm::decode_skill(m, q.mean);
    double err = 0.0;
    for (std::size_t k = 0; k < seq.size(); ++k)
      err += std::abs(double(dec[k]) - double(seq[k])) / double(seq.size());
    worst_mean_err = std::max(worst_mean_err, err);
  }
  INFO("worst mean reconstruction error " << worst_mean_err);
  CHECK(worst_mean_err < 0.01);

  // On held-out states the prior sits closer (in KL) to the posterior of the
  // skill that actually occurs there than to the other skill's posterior in
  // at least 90% of cases.
  int correct = 0;
  for (int i = 0; i < 100; ++i) {
    const auto q_true = sm::encode_skill(m, segment_actions(held_out, i, cfg.horizon));
    const auto q_other =
        sm::encode_skill(m, segment_actions(held_out, (i + 1) % 100, cfg.horizon));
    const auto p = sm::prior_forward(m, first_observation(held_out, i));
    const double kl_true = diag_kl(q_true.mean, q_true.log_std, p.mean, p.log_std);
    const double kl_other = diag_kl(q_other.mean, q_other.log_std, p.mean, p.log_std);
    if (kl_true < kl_other) ++correct;
  }
  INFO("prior discrimination " << correct << "/100");
  CHECK(correct >= 90);

  // Metric files exist and carry the expected header.
  std::ifstream val_csv(prefix + ".val.csv");
  REQUIRE(bool(val_csv));
  std::string header;
  std::getline(val_csv, header);
  CHECK(header == "step,reconstruction,regularization_kl,prior_kl,total");
}

TEST_CASE("checkpoint round trip restores the exact model") {
  const auto corpus = two_skill_corpus(10, 12, 5);
  const sm::SkillModelConfig cfg = tiny_config(1e-2, 40);
  const std::string prefix = temp_prefix("sprl_skill_roundtrip");
  sm::train_skill_model<float>(corpus, cfg, prefix, 3);

  sm::SkillModel<float> a = sm::load_skill_model<float>(prefix);
  sm::SkillModel<float> b = sm::load_skill_model<float>(prefix);
  CHECK(a.cfg.z_dim == cfg.z_dim);
  CHECK(a.cfg.beta == cfg.beta);

  const auto seq = segment_actions(corpus, 1, cfg.horizon);
  const auto obs = first_observation(corpus, 1);
  CHECK(sm::encode_skill(a, seq).mean == sm::encode_skill(b, seq).mean);
  CHECK(sm::prior_forward(a, obs).mean == sm::prior_forward(b, obs).mean);
  CHECK(sm::prior_forward(a, obs).log_std == sm::prior_forward(b, obs).log_std);

  // Training is deterministic end to end: a rerun from the same seed lands on
  // bitwise-identical validation numbers.
  const std::string prefix2 = temp_prefix("sprl_skill_roundtrip2");
  const auto r1 = sm::train_skill_model<float>(corpus, cfg, prefix2, 3);
  const auto r2 = sm::train_skill_model<float>(corpus, cfg, prefix2, 3);
  CHECK(r1.final_val.total == r2.final_val.total);
  CHECK(r1.final_val.reconstruction == r2.final_val.reconstruction);
}

TEST_CASE("beta sweeps trade reconstruction against latent information monotonically") {
  const auto corpus = two_skill_corpus(30, 12, 33);
  std::vector<double> reg_kls;
  for (const double beta : {1e-3, 1e-2, 1e-1}) {
    const sm::SkillModelConfig cfg = tiny_config(beta, 1200);
    const std::string prefix =
        temp_prefix("sprl_skill_beta" + std::to_string(int(beta * 1000)));
    const auto result = sm::train_skill_model<float>(corpus, cfg, prefix, 11);
    reg_kls.push_back(result.final_val.regularization_kl);
  }
  INFO("regularization KL by beta: " << reg_kls[0] << " " << reg_kls[1] << " " << reg_kls[2]);
  CHECK(reg_kls[0] > reg_kls[1]);
  CHECK(reg_kls[1] > reg_kls[2]);
}

TEST_CASE("divergent training aborts with a numerical error instead of saving garbage") {
  const auto corpus = two_skill_corpus(10, 12, 55);
  sm::SkillModelConfig cfg = tiny_config(1e-2, 200);
  cfg.optimizer.learning_rate = 1e12;
  const std::string prefix = temp_prefix("sprl_skill_diverge");
  CHECK_THROWS_AS(sm::train_skill_model<float>(corpus, cfg, prefix, 1),
                  NumericalError);
}

TEST_CASE("training rejects mismatched datasets and tiny corpora") {
  const auto corpus = two_skill_corpus(10, 12, 5);
  sm::SkillModelConfig cfg = tiny_config();
  cfg.obs_dim = 6;
  CHECK_THROWS_AS(
      sm::train_skill_model<float>(corpus, cfg, temp_prefix("sprl_skill_bad"), 1),
      UsageError);

  ds::Dataset single;
  single.meta = corpus.meta;
  single.trajectories.push_back(corpus.trajectories[0]);
  CHECK_THROWS_AS(sm::train_skill_model<float>(single, tiny_config(),
                                               temp_prefix("sprl_skill_bad"), 1),
                  UsageError);
}
