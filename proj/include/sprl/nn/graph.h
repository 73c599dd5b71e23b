#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/kernels/kernels.h"
#include "sprl/nn/params.h"
#include "sprl/nn/tensor.h"

namespace sprl {

// Eager tape-based reverse-mode autodiff. Every op computes its value
// immediately and, when gradients are enabled, records a closure that
// scatters the output gradient back onto its inputs. Nodes are identified by
// index into the tape; ops only ever reference earlier nodes, so a single
// reverse sweep visits them in valid topological order.
//
// Heavy inner loops (matrix products, transcendentals, reductions) go through
// the runtime-dispatched kernels; small glue loops are written inline.
template <class S>
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_(grad_enabled) {}

  bool grad_enabled() const { return grad_; }
  int node_count() const { return int(nodes_.size()); }

  const Tensor<S>& value(int id) const { return check(id).value; }

  // Gradient of the last backward() loss w.r.t. node `id`; zeros if the node
  // received no gradient.
  Tensor<S> grad(int id) const {
    const Node& n = check(id);
    if (n.grad.size() == 0)
      return Tensor<S>(n.value.rows, n.value.cols, S(0));
    return n.grad;
  }

  S scalar(int id) const {
    const Tensor<S>& v = value(id);
    if (v.size() != 1) throw UsageError("graph: node is not a scalar");
    return v.data[0];
  }

  // ---- leaves ----

  int input(Tensor<S> t, bool needs_grad = false) {
    return push(std::move(t), needs_grad && grad_);
  }

  int input(const std::vector<S>& row) {
    Tensor<S> t(1, int(row.size()));
    t.data = row;
    return push(std::move(t), false);
  }

  // Parameter leaf: value copied in; after backward() the accumulated
  // gradient is added onto p.grad.
  int param(Param<S>& p) {
    int id = push(Tensor<S>(p.value), grad_);
    if (grad_) bindings_.emplace_back(id, &p);
    return id;
  }

  // ---- arithmetic ----

  int matmul(int a, int b) {
    const Tensor<S>&av = val(a), &bv = val(b);
    if (av.cols != bv.rows)
      throw DimensionError("matmul: inner dimensions disagree (" +
                           shape_str(av) + " x " + shape_str(bv) + ")");
    Tensor<S> y(av.rows, bv.cols);
    kernels::gemm_nn(av.rows, bv.cols, av.cols, av.ptr(), av.cols, bv.ptr(),
                     bv.cols, y.ptr(), y.cols, false);
    return push_op(std::move(y), {a, b}, [a, b](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      const Tensor<S>&av = g.val(a), &bv = g.val(b);
      if (g.wants_grad(a)) {
        Tensor<S>& da = g.grad_buf(a);
        kernels::gemm_nt(av.rows, av.cols, bv.cols, dy.ptr(), dy.cols,
                         bv.ptr(), bv.cols, da.ptr(), da.cols, true);
      }
      if (g.wants_grad(b)) {
        Tensor<S>& db = g.grad_buf(b);
        kernels::gemm_tn(bv.rows, bv.cols, av.rows, av.ptr(), av.cols,
                         dy.ptr(), dy.cols, db.ptr(), db.cols, true);
      }
    });
  }

  // y = x + row broadcast over every row of x (bias add).
  int add_row(int x, int row) {
    const Tensor<S>&xv = val(x), &rv = val(row);
    if (rv.rows != 1 || rv.cols != xv.cols)
      throw DimensionError("add_row: row must be 1x" + std::to_string(xv.cols));
    Tensor<S> y = xv;
    for (int i = 0; i < y.rows; ++i)
      kernels::vadd(y.cols, xv.ptr() + size_t(i) * y.cols, rv.ptr(),
                    y.ptr() + size_t(i) * y.cols);
    return push_op(std::move(y), {x, row}, [x, row](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      if (g.wants_grad(x)) g.accumulate(x, dy);
      if (g.wants_grad(row)) {
        Tensor<S>& dr = g.grad_buf(row);
        kernels::colsum(dy.rows, dy.cols, dy.ptr(), dy.cols, dr.ptr(), true);
      }
    });
  }

  int add(int a, int b) {
    binary_shape_check("add", a, b);
    const Tensor<S>&av = val(a), &bv = val(b);
    Tensor<S> y(av.rows, av.cols);
    kernels::vadd(y.size(), av.ptr(), bv.ptr(), y.ptr());
    return push_op(std::move(y), {a, b}, [a, b](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      if (g.wants_grad(a)) g.accumulate(a, dy);
      if (g.wants_grad(b)) g.accumulate(b, dy);
    });
  }

  int sub(int a, int b) {
    binary_shape_check("sub", a, b);
    const Tensor<S>&av = val(a), &bv = val(b);
    Tensor<S> y(av.rows, av.cols);
    kernels::vsub(y.size(), av.ptr(), bv.ptr(), y.ptr());
    return push_op(std::move(y), {a, b}, [a, b](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      if (g.wants_grad(a)) g.accumulate(a, dy);
      if (g.wants_grad(b))
        kernels::vaxpy(dy.size(), S(-1), dy.ptr(), g.grad_buf(b).ptr());
    });
  }

  int mul(int a, int b) {
    binary_shape_check("mul", a, b);
    const Tensor<S>&av = val(a), &bv = val(b);
    Tensor<S> y(av.rows, av.cols);
    kernels::vmul(y.size(), av.ptr(), bv.ptr(), y.ptr());
    return push_op(std::move(y), {a, b}, [a, b](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      const Tensor<S>&av = g.val(a), &bv = g.val(b);
      if (g.wants_grad(a)) {
        Tensor<S>& da = g.grad_buf(a);
        for (int i = 0; i < dy.size(); ++i)
          da.data[i] += dy.data[i] * bv.data[i];
      }
      if (g.wants_grad(b)) {
        Tensor<S>& db = g.grad_buf(b);
        for (int i = 0; i < dy.size(); ++i)
          db.data[i] += dy.data[i] * av.data[i];
      }
    });
  }

  // Elementwise minimum; ties route the gradient to `a`.
  int min_(int a, int b) {
    binary_shape_check("min", a, b);
    const Tensor<S>&av = val(a), &bv = val(b);
    Tensor<S> y(av.rows, av.cols);
    for (int i = 0; i < y.size(); ++i)
      y.data[i] = av.data[i] <= bv.data[i] ? av.data[i] : bv.data[i];
    return push_op(std::move(y), {a, b}, [a, b](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      const Tensor<S>&av = g.val(a), &bv = g.val(b);
      Tensor<S>* da = g.wants_grad(a) ? &g.grad_buf(a) : nullptr;
      Tensor<S>* db = g.wants_grad(b) ? &g.grad_buf(b) : nullptr;
      for (int i = 0; i < dy.size(); ++i) {
        if (av.data[i] <= bv.data[i]) {
          if (da) da->data[i] += dy.data[i];
        } else if (db) {
          db->data[i] += dy.data[i];
        }
      }
    });
  }

  int scale(int x, S c) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    kernels::vscale(y.size(), c, xv.ptr(), S(0), y.ptr());
    return push_op(std::move(y), {x}, [x, c](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      if (g.wants_grad(x))
        kernels::vaxpy(dy.size(), c, dy.ptr(), g.grad_buf(x).ptr());
    });
  }

  int add_scalar(int x, S c) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    kernels::vscale(y.size(), S(1), xv.ptr(), c, y.ptr());
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (g.wants_grad(x)) g.accumulate(x, g.nodes_[out].grad);
    });
  }

  // ---- nonlinearities ----

  int tanh_(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    kernels::vtanh(y.size(), xv.ptr(), y.ptr());
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &yv = g.val(out);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        dx.data[i] += dy.data[i] * (S(1) - yv.data[i] * yv.data[i]);
    });
  }

  int sigmoid_(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    kernels::vsigmoid(y.size(), xv.ptr(), y.ptr());
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &yv = g.val(out);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        dx.data[i] += dy.data[i] * yv.data[i] * (S(1) - yv.data[i]);
    });
  }

  int exp_(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    kernels::vexp(y.size(), xv.ptr(), y.ptr());
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &yv = g.val(out);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        dx.data[i] += dy.data[i] * yv.data[i];
    });
  }

  int log_(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    for (int i = 0; i < y.size(); ++i) y.data[i] = std::log(xv.data[i]);
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &xv = g.val(x);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        dx.data[i] += dy.data[i] / xv.data[i];
    });
  }

  int softplus(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    for (int i = 0; i < y.size(); ++i) {
      S v = xv.data[i];
      y.data[i] = v > S(0) ? v + std::log1p(std::exp(-v))
                           : std::log1p(std::exp(v));
    }
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &xv = g.val(x);
      Tensor<S> sig(xv.rows, xv.cols);
      kernels::vsigmoid(sig.size(), xv.ptr(), sig.ptr());
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        dx.data[i] += dy.data[i] * sig.data[i];
    });
  }

  int square(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    kernels::vmul(y.size(), xv.ptr(), xv.ptr(), y.ptr());
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &xv = g.val(x);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        dx.data[i] += dy.data[i] * S(2) * xv.data[i];
    });
  }

  int relu(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    for (int i = 0; i < y.size(); ++i)
      y.data[i] = xv.data[i] > S(0) ? xv.data[i] : S(0);
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &xv = g.val(x);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        if (xv.data[i] > S(0)) dx.data[i] += dy.data[i];
    });
  }

  // x * sigmoid(x): smooth relu-like activation, kink-free so finite
  // difference checks stay clean.
  int silu(int x) { return mul(x, sigmoid_(x)); }

  int clamp(int x, S lo, S hi) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, xv.cols);
    for (int i = 0; i < y.size(); ++i)
      y.data[i] = std::min(std::max(xv.data[i], lo), hi);
    return push_op(std::move(y), {x}, [x, lo, hi](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>&dy = g.nodes_[out].grad, &xv = g.val(x);
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.size(); ++i)
        if (xv.data[i] > lo && xv.data[i] < hi) dx.data[i] += dy.data[i];
    });
  }

  // ---- shape ops ----

  int slice_cols(int x, int c0, int c1) {
    const Tensor<S>& xv = val(x);
    if (c0 < 0 || c1 > xv.cols || c0 >= c1)
      throw DimensionError("slice_cols: bad range [" + std::to_string(c0) +
                           ", " + std::to_string(c1) + ") for " +
                           shape_str(xv));
    Tensor<S> y(xv.rows, c1 - c0);
    for (int i = 0; i < xv.rows; ++i)
      for (int j = 0; j < y.cols; ++j) y.at(i, j) = xv.at(i, c0 + j);
    return push_op(std::move(y), {x}, [x, c0](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>& dy = g.nodes_[out].grad;
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dy.rows; ++i)
        for (int j = 0; j < dy.cols; ++j) dx.at(i, c0 + j) += dy.at(i, j);
    });
  }

  int concat_cols(int a, int b) {
    const Tensor<S>&av = val(a), &bv = val(b);
    if (av.rows != bv.rows)
      throw DimensionError("concat_cols: row counts disagree (" +
                           shape_str(av) + " vs " + shape_str(bv) + ")");
    Tensor<S> y(av.rows, av.cols + bv.cols);
    for (int i = 0; i < y.rows; ++i) {
      for (int j = 0; j < av.cols; ++j) y.at(i, j) = av.at(i, j);
      for (int j = 0; j < bv.cols; ++j) y.at(i, av.cols + j) = bv.at(i, j);
    }
    int ac = av.cols;
    return push_op(std::move(y), {a, b}, [a, b, ac](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      if (g.wants_grad(a)) {
        Tensor<S>& da = g.grad_buf(a);
        for (int i = 0; i < da.rows; ++i)
          for (int j = 0; j < da.cols; ++j) da.at(i, j) += dy.at(i, j);
      }
      if (g.wants_grad(b)) {
        Tensor<S>& db = g.grad_buf(b);
        for (int i = 0; i < db.rows; ++i)
          for (int j = 0; j < db.cols; ++j) db.at(i, j) += dy.at(i, ac + j);
      }
    });
  }

  // ---- reductions ----

  int row_sum(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(xv.rows, 1);
    for (int i = 0; i < xv.rows; ++i)
      y.at(i, 0) = kernels::vsum(xv.cols, xv.ptr() + size_t(i) * xv.cols);
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      const Tensor<S>& dy = g.nodes_[out].grad;
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dx.rows; ++i)
        for (int j = 0; j < dx.cols; ++j) dx.at(i, j) += dy.at(i, 0);
    });
  }

  int sum_all(int x) {
    const Tensor<S>& xv = val(x);
    Tensor<S> y(1, 1, kernels::vsum(xv.size(), xv.ptr()));
    return push_op(std::move(y), {x}, [x](Graph& g, int out) {
      if (!g.wants_grad(x)) return;
      S d = g.nodes_[out].grad.data[0];
      Tensor<S>& dx = g.grad_buf(x);
      for (int i = 0; i < dx.size(); ++i) dx.data[i] += d;
    });
  }

  int mean_all(int x) {
    const Tensor<S>& xv = val(x);
    if (xv.size() == 0) throw UsageError("mean_all: empty tensor");
    return scale(sum_all(x), S(1) / S(xv.size()));
  }

  // ---- barriers and normalization ----

  // Forward identity (bitwise); no gradient flows to x.
  int stop_gradient(int x) { return push(Tensor<S>(val(x)), false); }

  // Per-row normalization with learned gain/bias rows.
  int layer_norm(int x, int gain, int bias, S eps = S(1e-5)) {
    const Tensor<S>&xv = val(x), &gv = val(gain), &bv = val(bias);
    if (gv.rows != 1 || gv.cols != xv.cols || bv.rows != 1 ||
        bv.cols != xv.cols)
      throw DimensionError("layer_norm: gain/bias must be 1x" +
                           std::to_string(xv.cols));
    const int B = xv.rows, D = xv.cols;
    Tensor<S> y(B, D), xhat(B, D);
    Tensor<S> inv_std(B, 1);
    for (int i = 0; i < B; ++i) {
      const S* row = xv.ptr() + size_t(i) * D;
      S mu = kernels::vsum(D, row) / S(D);
      S var = S(0);
      for (int j = 0; j < D; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= S(D);
      S is = S(1) / std::sqrt(var + eps);
      inv_std.at(i, 0) = is;
      for (int j = 0; j < D; ++j) {
        S xh = (row[j] - mu) * is;
        xhat.at(i, j) = xh;
        y.at(i, j) = gv.data[j] * xh + bv.data[j];
      }
    }
    int id = push_op(std::move(y), {x, gain, bias}, nullptr);
    if (!nodes_[id].needs_grad) return id;
    aux_[id] = {std::move(xhat), std::move(inv_std)};
    nodes_[id].backward = [x, gain, bias, D](Graph& g, int out) {
      const Tensor<S>& dy = g.nodes_[out].grad;
      const auto& aux = g.aux_.at(out);
      const Tensor<S>& xhat = aux.first;
      const Tensor<S>& inv_std = aux.second;
      const Tensor<S>& gv = g.val(gain);
      if (g.wants_grad(gain)) {
        Tensor<S>& dg = g.grad_buf(gain);
        for (int i = 0; i < dy.rows; ++i)
          for (int j = 0; j < D; ++j)
            dg.data[j] += dy.at(i, j) * xhat.at(i, j);
      }
      if (g.wants_grad(bias)) {
        Tensor<S>& db = g.grad_buf(bias);
        kernels::colsum(dy.rows, D, dy.ptr(), D, db.ptr(), true);
      }
      if (g.wants_grad(x)) {
        Tensor<S>& dx = g.grad_buf(x);
        for (int i = 0; i < dy.rows; ++i) {
          S mean_dxh = S(0), mean_dxh_xh = S(0);
          for (int j = 0; j < D; ++j) {
            S dxh = dy.at(i, j) * gv.data[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xhat.at(i, j);
          }
          mean_dxh /= S(D);
          mean_dxh_xh /= S(D);
          for (int j = 0; j < D; ++j) {
            S dxh = dy.at(i, j) * gv.data[j];
            dx.at(i, j) += inv_std.at(i, 0) *
                           (dxh - mean_dxh - xhat.at(i, j) * mean_dxh_xh);
          }
        }
      }
    };
    return id;
  }

  // ---- backward ----

  // Reverse sweep from a scalar loss; accumulates parameter gradients onto
  // their bound Param::grad tensors.
  void backward(int loss) {
    if (!grad_) throw UsageError("backward: graph built with gradients off");
    Node& ln = check(loss);
    if (ln.value.size() != 1)
      throw UsageError("backward: loss must be scalar, got " +
                       shape_str(ln.value));
    grad_buf(loss).data[0] = S(1);
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
    for (auto& [id, p] : bindings_) {
      const Tensor<S>& gsrc = nodes_[id].grad;
      if (gsrc.size() == 0) continue;
      kernels::vadd(gsrc.size(), gsrc.ptr(), p->grad.ptr(), p->grad.ptr());
    }
  }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool needs_grad = false;
    std::function<void(Graph&, int)> backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param<S>*>> bindings_;
  // Saved activations for fused backward rules (keyed by node id).
  std::map<int, std::pair<Tensor<S>, Tensor<S>>> aux_;
  bool grad_;

  Node& check(int id) {
    if (id < 0 || id >= int(nodes_.size()))
      throw UsageError("graph: invalid node id");
    return nodes_[id];
  }
  const Node& check(int id) const {
    return const_cast<Graph*>(this)->check(id);
  }

  const Tensor<S>& val(int id) { return check(id).value; }

  bool wants_grad(int id) { return nodes_[id].needs_grad; }

  Tensor<S>& grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0)
      n.grad = Tensor<S>(n.value.rows, n.value.cols, S(0));
    return n.grad;
  }

  void accumulate(int id, const Tensor<S>& dy) {
    Tensor<S>& dst = grad_buf(id);
    kernels::vadd(dy.size(), dy.ptr(), dst.ptr(), dst.ptr());
  }

  static std::string shape_str(const Tensor<S>& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
  }

  void binary_shape_check(const char* op, int a, int b) {
    const Tensor<S>&av = val(a), &bv = val(b);
    if (!av.same_shape(bv))
      throw DimensionError(std::string(op) + ": shapes disagree (" +
                           shape_str(av) + " vs " + shape_str(bv) + ")");
  }

  int push(Tensor<S> value, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), {}, needs_grad, nullptr});
    return int(nodes_.size()) - 1;
  }

  int push_op(Tensor<S> value, std::initializer_list<int> inputs,
              std::function<void(Graph&, int)> bw) {
    bool ng = false;
    for (int i : inputs) ng = ng || nodes_[i].needs_grad;
    ng = ng && grad_;
    int id = push(std::move(value), ng);
    if (ng) nodes_[id].backward = std::move(bw);
    return id;
  }
};

}  // namespace sprl
