#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/nn/graph.h"

namespace sprl {

// Bounds on log standard deviations everywhere a Gaussian head is produced;
// prevents collapse (sigma -> 0) and explosion.
inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

inline constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)

// Diagonal Gaussian over a single vector; the universal distribution type
// for posteriors, priors, and policies outside computation graphs.
template <class S>
struct DiagGaussian {
  std::vector<S> mean;
  std::vector<S> log_std;

  int dim() const { return int(mean.size()); }

  void validate() const {
    if (mean.size() != log_std.size())
      throw DimensionError("gaussian: mean/log_std lengths disagree");
    for (S v : log_std)
      if (double(v) < kLogStdMin - 1e-9 || double(v) > kLogStdMax + 1e-9)
        throw NumericalError("gaussian: log_std outside clamp bounds");
  }
};

// Analytic KL(q || p), summed over dimensions:
//   sum_d log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2
template <class S>
double gaussian_kl(const DiagGaussian<S>& q, const DiagGaussian<S>& p) {
  if (q.dim() != p.dim())
    throw DimensionError("gaussian_kl: dimensions disagree");
  double kl = 0.0;
  for (int i = 0; i < q.dim(); ++i) {
    double lsq = q.log_std[i], lsp = p.log_std[i];
    double dq = std::exp(lsq), dp = std::exp(lsp);
    double dm = double(q.mean[i]) - double(p.mean[i]);
    kl += lsp - lsq + (dq * dq + dm * dm) / (2.0 * dp * dp) - 0.5;
  }
  return kl;
}

// mean + exp(log_std) * noise
template <class S>
std::vector<S> gaussian_rsample(const DiagGaussian<S>& d,
                                const std::vector<S>& noise) {
  if (int(noise.size()) != d.dim())
    throw DimensionError("gaussian_rsample: noise length mismatch");
  std::vector<S> out(d.dim());
  for (int i = 0; i < d.dim(); ++i)
    out[i] = d.mean[i] + S(std::exp(double(d.log_std[i]))) * noise[i];
  return out;
}

// Squash a reparameterized Gaussian sample into (-range, range) via
// range*tanh(u) and return the sample's log-density under the squashed
// distribution. The change-of-variables correction per dimension is
// -log(range * (1 - tanh(u)^2)), computed stably as
// log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)).
template <class S>
std::pair<std::vector<S>, double> tanh_squash(const DiagGaussian<S>& d,
                                              const std::vector<S>& noise,
                                              double range) {
  if (range <= 0) throw UsageError("tanh_squash: range must be positive");
  if (int(noise.size()) != d.dim())
    throw DimensionError("tanh_squash: noise length mismatch");
  std::vector<S> action(d.dim());
  double logp = 0.0;
  for (int i = 0; i < d.dim(); ++i) {
    double u = double(d.mean[i]) + std::exp(double(d.log_std[i])) *
                                       double(noise[i]);
    double t = std::tanh(u);
    action[i] = S(range * t);
    double log_one_minus_t2 =
        2.0 * (std::log(2.0) - u - std::log1p(std::exp(-2.0 * u)));
    logp += -double(d.log_std[i]) - 0.5 * kLogTwoPi -
            0.5 * double(noise[i]) * double(noise[i]) - std::log(range) -
            log_one_minus_t2;
  }
  return {std::move(action), logp};
}

// ---- graph-node forms (batched, differentiable) ----

// A batch of diagonal Gaussians as two [B x d] nodes.
template <class S>
struct GaussianNodes {
  int mean = -1;
  int log_std = -1;
};

// Splits a [B x 2d] head into mean and clamped log_std.
template <class S>
GaussianNodes<S> gaussian_head(Graph<S>& g, int head, int d) {
  if (g.value(head).cols != 2 * d)
    throw DimensionError("gaussian_head: expected width " +
                         std::to_string(2 * d));
  GaussianNodes<S> out;
  out.mean = g.slice_cols(head, 0, d);
  out.log_std = g.clamp(g.slice_cols(head, d, 2 * d), S(kLogStdMin),
                        S(kLogStdMax));
  return out;
}

// Per-row analytic KL(q || p): [B x 1].
template <class S>
int gaussian_kl_node(Graph<S>& g, const GaussianNodes<S>& q,
                     const GaussianNodes<S>& p) {
  int dls = g.sub(p.log_std, q.log_std);
  int var_q = g.exp_(g.scale(q.log_std, S(2)));
  int inv_two_var_p = g.scale(g.exp_(g.scale(p.log_std, S(-2))), S(0.5));
  int dm2 = g.square(g.sub(q.mean, p.mean));
  int ratio = g.mul(g.add(var_q, dm2), inv_two_var_p);
  return g.row_sum(g.add_scalar(g.add(dls, ratio), S(-0.5)));
}

// Per-row analytic KL(q || N(0, I)): [B x 1].
template <class S>
int standard_kl_node(Graph<S>& g, const GaussianNodes<S>& q) {
  int var_q = g.exp_(g.scale(q.log_std, S(2)));
  int m2 = g.square(q.mean);
  int per_dim = g.add_scalar(
      g.sub(g.scale(g.add(var_q, m2), S(0.5)), q.log_std), S(-0.5));
  return g.row_sum(per_dim);
}

template <class S>
GaussianNodes<S> stop_gradient(Graph<S>& g, const GaussianNodes<S>& q) {
  return {g.stop_gradient(q.mean), g.stop_gradient(q.log_std)};
}

// mean + exp(log_std) * noise, differentiable w.r.t. mean and log_std.
template <class S>
int rsample_node(Graph<S>& g, const GaussianNodes<S>& q, int noise) {
  return g.add(q.mean, g.mul(g.exp_(q.log_std), noise));
}

template <class S>
struct SquashNodes {
  int pre_squash = -1;   // u: [B x d]
  int action = -1;       // range * tanh(u): [B x d]
  int log_density = -1;  // [B x 1]
};

// Reparameterized draw from q squashed into (-range, range), with its
// differentiable log-density (same formula as the scalar tanh_squash).
template <class S>
SquashNodes<S> tanh_squash_node(Graph<S>& g, const GaussianNodes<S>& q,
                                int noise, S range) {
  if (range <= S(0)) throw UsageError("tanh_squash: range must be positive");
  SquashNodes<S> out;
  out.pre_squash = rsample_node(g, q, noise);
  out.action = g.scale(g.tanh_(out.pre_squash), range);
  int sp = g.softplus(g.scale(out.pre_squash, S(-2)));
  int per_dim = g.add(g.add(g.scale(q.log_std, S(-1)),
                            g.scale(g.square(noise), S(-0.5))),
                      g.add(g.scale(out.pre_squash, S(2)), g.scale(sp, S(2))));
  per_dim = g.add_scalar(
      per_dim, S(-2.0 * std::log(2.0) - 0.5 * kLogTwoPi -
                 std::log(double(range))));
  out.log_density = g.row_sum(per_dim);
  return out;
}

}  // namespace sprl
