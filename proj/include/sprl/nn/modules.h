#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/nn/graph.h"
#include "sprl/nn/params.h"

namespace sprl {

enum class Activation { kTanh, kRelu, kSilu };

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "silu") return Activation::kSilu;
  throw UsageError("unknown activation '" + s + "'");
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    default: return "silu";
  }
}

struct MlpConfig {
  std::vector<int> sizes;  // input, hidden..., output widths
  Activation activation = Activation::kSilu;
  bool layer_norm = true;  // normalize hidden pre-activations
};

namespace detail {

// Uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class S>
void fan_in_init(Tensor<S>& t, int fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(double(fan_in));
  for (auto& v : t.data) v = S(uniform(rng, -bound, bound));
}

template <class S>
int apply_activation(Graph<S>& g, int x, Activation a) {
  switch (a) {
    case Activation::kTanh: return g.tanh_(x);
    case Activation::kRelu: return g.relu(x);
    default: return g.silu(x);
  }
}

}  // namespace detail

// Fully-connected stack. Weights live in a ParamSet under
// "<prefix>.w<i>" / "<prefix>.b<i>" (+ ".ln_g<i>" / ".ln_b<i>" when
// normalizing); weight i maps sizes[i] -> sizes[i+1]. Hidden layers apply
// optional layer normalization then the activation; the final layer is
// linear.
template <class S>
class Mlp {
 public:
  Mlp(std::string prefix, MlpConfig cfg)
      : prefix_(std::move(prefix)), cfg_(std::move(cfg)) {
    if (cfg_.sizes.size() < 2)
      throw UsageError("mlp '" + prefix_ + "': need at least input and output");
    for (int s : cfg_.sizes)
      if (s < 1) throw UsageError("mlp '" + prefix_ + "': bad layer size");
  }

  const MlpConfig& config() const { return cfg_; }
  int input_width() const { return cfg_.sizes.front(); }
  int output_width() const { return cfg_.sizes.back(); }

  void init(ParamSet<S>& ps, Rng& rng) const {
    for (size_t i = 0; i + 1 < cfg_.sizes.size(); ++i) {
      int in = cfg_.sizes[i], out = cfg_.sizes[i + 1];
      auto& w = ps.add(prefix_ + ".w" + std::to_string(i), in, out);
      auto& b = ps.add(prefix_ + ".b" + std::to_string(i), 1, out);
      detail::fan_in_init(w.value, in, rng);
      detail::fan_in_init(b.value, in, rng);
      if (cfg_.layer_norm && i + 2 < cfg_.sizes.size()) {
        ps.add(prefix_ + ".ln_g" + std::to_string(i), 1, out).value =
            Tensor<S>(1, out, S(1));
        ps.add(prefix_ + ".ln_b" + std::to_string(i), 1, out);
      }
    }
  }

  int forward(Graph<S>& g, ParamSet<S>& ps, int x) const {
    if (g.value(x).cols != input_width())
      throw DimensionError("mlp '" + prefix_ + "': input width " +
                           std::to_string(g.value(x).cols) + ", expected " +
                           std::to_string(input_width()));
    int h = x;
    for (size_t i = 0; i + 1 < cfg_.sizes.size(); ++i) {
      int w = g.param(ps.at(prefix_ + ".w" + std::to_string(i)));
      int b = g.param(ps.at(prefix_ + ".b" + std::to_string(i)));
      h = g.add_row(g.matmul(h, w), b);
      if (i + 2 < cfg_.sizes.size()) {
        if (cfg_.layer_norm) {
          int lg = g.param(ps.at(prefix_ + ".ln_g" + std::to_string(i)));
          int lb = g.param(ps.at(prefix_ + ".ln_b" + std::to_string(i)));
          h = g.layer_norm(h, lg, lb);
        }
        h = detail::apply_activation(g, h, cfg_.activation);
      }
    }
    return h;
  }

 private:
  std::string prefix_;
  MlpConfig cfg_;
};

struct LstmConfig {
  int input = 0;
  int hidden = 0;
};

// Single-layer LSTM. One combined weight "<prefix>.w" of shape
// [input+hidden, 4*hidden] and bias "<prefix>.b"; gate order (i, f, g, o).
// The forget-gate bias starts at +1 (common practice for gradient flow early
// in training).
template <class S>
class Lstm {
 public:
  Lstm(std::string prefix, LstmConfig cfg)
      : prefix_(std::move(prefix)), cfg_(cfg) {
    if (cfg_.input < 1 || cfg_.hidden < 1)
      throw UsageError("lstm '" + prefix_ + "': bad dimensions");
  }

  const LstmConfig& config() const { return cfg_; }

  void init(ParamSet<S>& ps, Rng& rng) const {
    int in = cfg_.input + cfg_.hidden, out = 4 * cfg_.hidden;
    auto& w = ps.add(prefix_ + ".w", in, out);
    auto& b = ps.add(prefix_ + ".b", 1, out);
    detail::fan_in_init(w.value, in, rng);
    detail::fan_in_init(b.value, in, rng);
    for (int j = cfg_.hidden; j < 2 * cfg_.hidden; ++j)
      b.value.at(0, j) += S(1);
  }

  struct State {
    int h = -1, c = -1;  // graph nodes, each [B x hidden]
  };

  State initial_state(Graph<S>& g, int batch) const {
    State s;
    s.h = g.input(Tensor<S>(batch, cfg_.hidden));
    s.c = g.input(Tensor<S>(batch, cfg_.hidden));
    return s;
  }

  State step(Graph<S>& g, ParamSet<S>& ps, int x, const State& prev) const {
    if (g.value(x).cols != cfg_.input)
      throw DimensionError("lstm '" + prefix_ + "': input width " +
                           std::to_string(g.value(x).cols) + ", expected " +
                           std::to_string(cfg_.input));
    int w = g.param(ps.at(prefix_ + ".w"));
    int b = g.param(ps.at(prefix_ + ".b"));
    int gates = g.add_row(g.matmul(g.concat_cols(x, prev.h), w), b);
    int H = cfg_.hidden;
    int gi = g.sigmoid_(g.slice_cols(gates, 0, H));
    int gf = g.sigmoid_(g.slice_cols(gates, H, 2 * H));
    int gg = g.tanh_(g.slice_cols(gates, 2 * H, 3 * H));
    int go = g.sigmoid_(g.slice_cols(gates, 3 * H, 4 * H));
    State next;
    next.c = g.add(g.mul(gf, prev.c), g.mul(gi, gg));
    next.h = g.mul(go, g.tanh_(next.c));
    return next;
  }

  // Unrolls over the input sequence from a zero state; returns the hidden
  // state after every step.
  std::vector<int> unroll(Graph<S>& g, ParamSet<S>& ps,
                          const std::vector<int>& xs) const {
    if (xs.empty()) throw UsageError("lstm '" + prefix_ + "': empty sequence");
    State s = initial_state(g, g.value(xs[0]).rows);
    std::vector<int> hs;
    hs.reserve(xs.size());
    for (int x : xs) {
      s = step(g, ps, x, s);
      hs.push_back(s.h);
    }
    return hs;
  }

 private:
  std::string prefix_;
  LstmConfig cfg_;
};

}  // namespace sprl
