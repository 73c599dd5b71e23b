#include "kernels_scalar.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <type_traits>

namespace sprl::kernels::scalar {

template <class S>
void gemm_nn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    S* crow = c + static_cast<size_t>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = S(0);
    }
    for (int p = 0; p < k; ++p) {
      const S av = a[static_cast<size_t>(i) * lda + p];
      const S* brow = b + static_cast<size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void gemm_nt(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<size_t>(i) * lda;
    S* crow = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const S* brow = b + static_cast<size_t>(j) * ldb;
      S acc = S(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

template <class S>
void gemm_tn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i) {
      S* crow = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) crow[j] = S(0);
    }
  }
  for (int p = 0; p < k; ++p) {
    const S* arow = a + static_cast<size_t>(p) * lda;
    const S* brow = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const S av = arow[i];
      S* crow = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void vtanh(int n, const S* x, S* y) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <class S>
void vsigmoid(int n, const S* x, S* y) {
  for (int i = 0; i < n; ++i) {
    // Evaluated via exp of a non-positive argument in both branches.
    if (x[i] >= S(0)) {
      y[i] = S(1) / (S(1) + std::exp(-x[i]));
    } else {
      const S e = std::exp(x[i]);
      y[i] = e / (S(1) + e);
    }
  }
}

template <class S>
void vexp(int n, const S* x, S* y) {
  if constexpr (std::is_same_v<S, float>) {
    // Same input clamp as the vectorized path: saturates to a finite max
    // instead of overflowing to inf.
    for (int i = 0; i < n; ++i)
      y[i] = std::exp(std::clamp(x[i], -87.0f, 88.0f));
  } else {
    for (int i = 0; i < n; ++i) y[i] = std::exp(x[i]);
  }
}

template <class S>
void vadd(int n, const S* a, const S* b, S* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <class S>
void vsub(int n, const S* a, const S* b, S* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

template <class S>
void vmul(int n, const S* a, const S* b, S* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <class S>
void vaxpy(int n, S alpha, const S* x, S* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
void vscale(int n, S alpha, const S* x, S beta, S* y) {
  for (int i = 0; i < n; ++i) y[i] = alpha * x[i] + beta;
}

template <class S>
S vsum(int n, const S* x) {
  S acc = S(0);
  for (int i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <class S>
S vdot(int n, const S* a, const S* b) {
  S acc = S(0);
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class S>
void colsum(int m, int n, const S* a, int lda, S* out, bool accumulate) {
  if (!accumulate) {
    for (int j = 0; j < n; ++j) out[j] = S(0);
  }
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<size_t>(i) * lda;
    for (int j = 0; j < n; ++j) out[j] += arow[j];
  }
}

template <class S>
void adam_step(int n, S* p, const S* g, S* m, S* v, S beta1, S beta2, S eps,
               S lr, S bc1, S bc2, bool adaptive, S rect) {
  for (int i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (S(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (S(1) - beta2) * g[i] * g[i];
    const S mhat = m[i] * bc1;
    if (adaptive) {
      p[i] -= lr * rect * mhat / (std::sqrt(v[i] * bc2) + eps);
    } else {
      p[i] -= lr * mhat;
    }
  }
}

#define SPRL_INSTANTIATE(S)                                                   \
  template void gemm_nn<S>(int, int, int, const S*, int, const S*, int, S*,   \
                           int, bool);                                        \
  template void gemm_nt<S>(int, int, int, const S*, int, const S*, int, S*,   \
                           int, bool);                                        \
  template void gemm_tn<S>(int, int, int, const S*, int, const S*, int, S*,   \
                           int, bool);                                        \
  template void vtanh<S>(int, const S*, S*);                                  \
  template void vsigmoid<S>(int, const S*, S*);                               \
  template void vexp<S>(int, const S*, S*);                                   \
  template void vadd<S>(int, const S*, const S*, S*);                         \
  template void vsub<S>(int, const S*, const S*, S*);                         \
  template void vmul<S>(int, const S*, const S*, S*);                         \
  template void vaxpy<S>(int, S, const S*, S*);                               \
  template void vscale<S>(int, S, const S*, S, S*);                           \
  template S vsum<S>(int, const S*);                                          \
  template S vdot<S>(int, const S*, const S*);                                \
  template void colsum<S>(int, int, const S*, int, S*, bool);                 \
  template void adam_step<S>(int, S*, const S*, S*, S*, S, S, S, S, S, S,     \
                             bool, S);

SPRL_INSTANTIATE(float)
SPRL_INSTANTIATE(double)
#undef SPRL_INSTANTIATE

}  // namespace sprl::kernels::scalar
