#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/kernels/kernels.h"
#include "sprl/nn/tensor.h"

namespace sprl {

// One named parameter tensor with its gradient accumulator and Adam moments.
template <class S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  Tensor<S> m, v;
};

// Ordered collection of named parameters sharing one optimizer step counter.
// Iteration follows insertion order so checkpoints and updates are
// deterministic. Storage is a deque so references returned by add()/at()
// stay valid as more parameters are added.
template <class S>
class ParamSet {
 public:
  Param<S>& add(const std::string& name, int rows, int cols) {
    if (index_.count(name))
      throw UsageError("paramset: duplicate parameter '" + name + "'");
    index_[name] = params_.size();
    params_.push_back(Param<S>{name, Tensor<S>(rows, cols),
                               Tensor<S>(rows, cols), Tensor<S>(rows, cols),
                               Tensor<S>(rows, cols)});
    return params_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Param<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw UsageError("paramset: unknown parameter '" + name + "'");
    return params_[it->second];
  }
  const Param<S>& at(const std::string& name) const {
    return const_cast<ParamSet*>(this)->at(name);
  }

  std::deque<Param<S>>& all() { return params_; }
  const std::deque<Param<S>>& all() const { return params_; }
  size_t count() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_)
      std::fill(p.grad.data.begin(), p.grad.data.end(), S(0));
  }

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }
  void bump_step() { ++step_; }

  // Total number of scalar parameter values.
  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.value.data.size();
    return n;
  }

 private:
  std::deque<Param<S>> params_;
  std::map<std::string, size_t> index_;
  int64_t step_ = 0;
};

enum class OptimizerKind { kAdam, kRadam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double learning_rate = 1e-3;
  double epsilon = 1e-8;
};

inline void validate(const OptimizerConfig& cfg) {
  if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
    throw UsageError("optimizer: betas must lie in [0, 1)");
  if (cfg.learning_rate <= 0)
    throw UsageError("optimizer: learning_rate must be positive");
}

// One Adam / RAdam step over every parameter in the set. RAdam follows the
// published rectification formula; while the rectification term is undefined
// (rho <= 4, the first few steps) it falls back to bias-corrected momentum.
template <class S>
void optimizer_step(ParamSet<S>& params, const OptimizerConfig& cfg) {
  validate(cfg);
  for (const auto& p : params.all())
    if (!p.grad.all_finite())
      throw NumericalError("optimizer: non-finite gradient for parameter '" +
                           p.name + "'");

  params.bump_step();
  const double t = double(params.step_count());
  const double b1t = std::pow(cfg.beta1, t);
  const double b2t = std::pow(cfg.beta2, t);
  const double bc1 = 1.0 / (1.0 - b1t);
  const double bc2 = 1.0 / (1.0 - b2t);

  bool adaptive = true;
  double rect = 1.0;
  if (cfg.kind == OptimizerKind::kRadam) {
    const double rho_inf = 2.0 / (1.0 - cfg.beta2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
    if (rho_t > 4.0) {
      rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    } else {
      adaptive = false;
    }
  }

  for (auto& p : params.all())
    kernels::adam_step(p.value.size(), p.value.ptr(), p.grad.ptr(),
                       p.m.ptr(), p.v.ptr(), S(cfg.beta1), S(cfg.beta2),
                       S(cfg.epsilon), S(cfg.learning_rate), S(bc1), S(bc2),
                       adaptive, S(rect));
}

}  // namespace sprl
