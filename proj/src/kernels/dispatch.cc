#include "sprl/kernels/kernels.h"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kernels_avx2.h"
#include "kernels_scalar.h"
#include "sprl/common/errors.h"

namespace sprl::kernels {

namespace {

bool detect_avx2() {
#if SPRL_HAVE_AVX2_BUILD
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const bool have = detect_avx2();
  if (const char* env = std::getenv("SPRL_KERNEL_BACKEND")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && have) return Backend::kAvx2;
  }
  return have ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend> g_backend{initial_backend()};

}  // namespace

bool avx2_available() {
  static const bool v = detect_avx2();
  return v;
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

const char* backend_name() {
  return backend() == Backend::kAvx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_available())
    throw UsageError("kernels: avx2 backend not supported on this CPU");
  g_backend.store(b, std::memory_order_relaxed);
}

#if SPRL_HAVE_AVX2_BUILD
#define SPRL_DISPATCH(fn, ...)                     \
  if (backend() == Backend::kAvx2) {               \
    return avx2::fn(__VA_ARGS__);                  \
  }                                                \
  return scalar::fn(__VA_ARGS__)
#else
#define SPRL_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

template <class S>
void gemm_nn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  SPRL_DISPATCH(gemm_nn, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <class S>
void gemm_nt(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  SPRL_DISPATCH(gemm_nt, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <class S>
void gemm_tn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  SPRL_DISPATCH(gemm_tn, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <class S>
void vtanh(int n, const S* x, S* y) {
  SPRL_DISPATCH(vtanh, n, x, y);
}

template <class S>
void vsigmoid(int n, const S* x, S* y) {
  SPRL_DISPATCH(vsigmoid, n, x, y);
}

template <class S>
void vexp(int n, const S* x, S* y) {
  SPRL_DISPATCH(vexp, n, x, y);
}

template <class S>
void vadd(int n, const S* a, const S* b, S* y) {
  SPRL_DISPATCH(vadd, n, a, b, y);
}

template <class S>
void vsub(int n, const S* a, const S* b, S* y) {
  SPRL_DISPATCH(vsub, n, a, b, y);
}

template <class S>
void vmul(int n, const S* a, const S* b, S* y) {
  SPRL_DISPATCH(vmul, n, a, b, y);
}

template <class S>
void vaxpy(int n, S alpha, const S* x, S* y) {
  SPRL_DISPATCH(vaxpy, n, alpha, x, y);
}

template <class S>
void vscale(int n, S alpha, const S* x, S beta, S* y) {
  SPRL_DISPATCH(vscale, n, alpha, x, beta, y);
}

template <class S>
S vsum(int n, const S* x) {
  SPRL_DISPATCH(vsum, n, x);
}

template <class S>
S vdot(int n, const S* a, const S* b) {
  SPRL_DISPATCH(vdot, n, a, b);
}

template <class S>
void colsum(int m, int n, const S* a, int lda, S* out, bool accumulate) {
  SPRL_DISPATCH(colsum, m, n, a, lda, out, accumulate);
}

template <class S>
void adam_step(int n, S* p, const S* g, S* m, S* v, S beta1, S beta2, S eps,
               S lr, S bc1, S bc2, bool adaptive, S rect) {
  SPRL_DISPATCH(adam_step, n, p, g, m, v, beta1, beta2, eps, lr, bc1, bc2,
                adaptive, rect);
}

#undef SPRL_DISPATCH

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

}  // namespace sprl::kernels
