#include "kernels_avx2.h"

#if SPRL_HAVE_AVX2_BUILD

#include <immintrin.h>

#include <cmath>

#include "kernels_scalar.h"

namespace sprl::kernels::avx2 {

namespace {

// Thin wrappers so the gemm tiles can be written once for float and double.
template <class S>
struct Vec;

template <>
struct Vec<float> {
  using V = __m256;
  static constexpr int kW = 8;
  static V load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(float x) { return _mm256_set1_ps(x); }
  static V zero() { return _mm256_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V sub(V a, V b) { return _mm256_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static float hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
  }
};

template <>
struct Vec<double> {
  using V = __m256d;
  static constexpr int kW = 4;
  static V load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(double x) { return _mm256_set1_pd(x); }
  static V zero() { return _mm256_setzero_pd(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V sub(V a, V b) { return _mm256_sub_pd(a, b); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static double hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
  }
};

// 4-row x 2-vector FMA tile over a full-width column block starting at j.
// AIdx maps (row r, depth p) to the A element; shared by the NN and TN paths.
template <class S, class AIdx>
inline void gemm_tile_block(int m, int k, AIdx a_at, const S* b, int ldb,
                            S* c, int ldc, int j, bool accumulate) {
  using T = Vec<S>;
  using V = typename T::V;
  constexpr int kW = T::kW;
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    V acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
    if (accumulate) {
      acc00 = T::load(c + (size_t)(i + 0) * ldc + j);
      acc01 = T::load(c + (size_t)(i + 0) * ldc + j + kW);
      acc10 = T::load(c + (size_t)(i + 1) * ldc + j);
      acc11 = T::load(c + (size_t)(i + 1) * ldc + j + kW);
      acc20 = T::load(c + (size_t)(i + 2) * ldc + j);
      acc21 = T::load(c + (size_t)(i + 2) * ldc + j + kW);
      acc30 = T::load(c + (size_t)(i + 3) * ldc + j);
      acc31 = T::load(c + (size_t)(i + 3) * ldc + j + kW);
    } else {
      acc00 = acc01 = acc10 = acc11 = T::zero();
      acc20 = acc21 = acc30 = acc31 = T::zero();
    }
    for (int p = 0; p < k; ++p) {
      const V b0 = T::load(b + (size_t)p * ldb + j);
      const V b1 = T::load(b + (size_t)p * ldb + j + kW);
      const V a0 = T::set1(a_at(i + 0, p));
      const V a1 = T::set1(a_at(i + 1, p));
      const V a2 = T::set1(a_at(i + 2, p));
      const V a3 = T::set1(a_at(i + 3, p));
      acc00 = T::fmadd(a0, b0, acc00);
      acc01 = T::fmadd(a0, b1, acc01);
      acc10 = T::fmadd(a1, b0, acc10);
      acc11 = T::fmadd(a1, b1, acc11);
      acc20 = T::fmadd(a2, b0, acc20);
      acc21 = T::fmadd(a2, b1, acc21);
      acc30 = T::fmadd(a3, b0, acc30);
      acc31 = T::fmadd(a3, b1, acc31);
    }
    T::store(c + (size_t)(i + 0) * ldc + j, acc00);
    T::store(c + (size_t)(i + 0) * ldc + j + kW, acc01);
    T::store(c + (size_t)(i + 1) * ldc + j, acc10);
    T::store(c + (size_t)(i + 1) * ldc + j + kW, acc11);
    T::store(c + (size_t)(i + 2) * ldc + j, acc20);
    T::store(c + (size_t)(i + 2) * ldc + j + kW, acc21);
    T::store(c + (size_t)(i + 3) * ldc + j, acc30);
    T::store(c + (size_t)(i + 3) * ldc + j + kW, acc31);
  }
  for (; i < m; ++i) {
    V acc0, acc1;
    if (accumulate) {
      acc0 = T::load(c + (size_t)i * ldc + j);
      acc1 = T::load(c + (size_t)i * ldc + j + kW);
    } else {
      acc0 = acc1 = T::zero();
    }
    for (int p = 0; p < k; ++p) {
      const V b0 = T::load(b + (size_t)p * ldb + j);
      const V b1 = T::load(b + (size_t)p * ldb + j + kW);
      const V av = T::set1(a_at(i, p));
      acc0 = T::fmadd(av, b0, acc0);
      acc1 = T::fmadd(av, b1, acc1);
    }
    T::store(c + (size_t)i * ldc + j, acc0);
    T::store(c + (size_t)i * ldc + j + kW, acc1);
  }
}

// Scalar cleanup for the rightmost columns that do not fill 2 vectors.
template <class S, class AIdx>
inline void gemm_tail_cols(int m, int k, AIdx a_at, const S* b, int ldb, S* c,
                           int ldc, int j0, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = j0; j < n; ++j) {
      S acc = accumulate ? c[(size_t)i * ldc + j] : S(0);
      for (int p = 0; p < k; ++p) acc += a_at(i, p) * b[(size_t)p * ldb + j];
      c[(size_t)i * ldc + j] = acc;
    }
  }
}

}  // namespace

template <class S>
void gemm_nn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  constexpr int kBlock = 2 * Vec<S>::kW;
  auto a_at = [a, lda](int i, int p) { return a[(size_t)i * lda + p]; };
  int j = 0;
  for (; j + kBlock <= n; j += kBlock)
    gemm_tile_block<S>(m, k, a_at, b, ldb, c, ldc, j, accumulate);
  if (j < n) gemm_tail_cols<S>(m, k, a_at, b, ldb, c, ldc, j, n, accumulate);
}

template <class S>
void gemm_tn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  constexpr int kBlock = 2 * Vec<S>::kW;
  auto a_at = [a, lda](int i, int p) { return a[(size_t)p * lda + i]; };
  int j = 0;
  for (; j + kBlock <= n; j += kBlock)
    gemm_tile_block<S>(m, k, a_at, b, ldb, c, ldc, j, accumulate);
  if (j < n) gemm_tail_cols<S>(m, k, a_at, b, ldb, c, ldc, j, n, accumulate);
}

template <class S>
void gemm_nt(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate) {
  using T = Vec<S>;
  using V = typename T::V;
  constexpr int kW = T::kW;
  const int kv = k - k % kW;
  for (int i = 0; i < m; ++i) {
    const S* arow = a + (size_t)i * lda;
    S* crow = c + (size_t)i * ldc;
    for (int j = 0; j < n; ++j) {
      const S* brow = b + (size_t)j * ldb;
      V acc = T::zero();
      for (int p = 0; p < kv; p += kW)
        acc = T::fmadd(T::load(arow + p), T::load(brow + p), acc);
      S dot = T::hsum(acc);
      for (int p = kv; p < k; ++p) dot += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + dot : dot;
    }
  }
}

namespace {

// Polynomial exp for 8 floats, after the style of the classic SSE/AVX math
// libraries. Max relative error vs libm is ~2 ulp over the clamped range.
inline __m256 exp256(__m256 x) {
  // Clamp keeps the 2^n exponent within range (n <= 127) and the result
  // normal, so exp saturates to finite values instead of inf / denormals.
  const __m256 hi = _mm256_set1_ps(88.0f);
  const __m256 lo = _mm256_set1_ps(-87.0f);
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 one = _mm256_set1_ps(1.0f);

  x = _mm256_min_ps(x, hi);
  x = _mm256_max_ps(x, lo);

  __m256 fx = _mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);

  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, _mm256_add_ps(x, one));

  const __m256i n = _mm256_cvttps_epi32(fx);
  const __m256i pow2 =
      _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(pow2));
}

inline __m256 sigmoid256(__m256 x) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), x));
  return _mm256_div_ps(one, _mm256_add_ps(one, e));
}

inline __m256 tanh256(__m256 x) {
  // tanh(x) = 2*sigmoid(2x) - 1
  const __m256 two = _mm256_set1_ps(2.0f);
  const __m256 s = sigmoid256(_mm256_mul_ps(two, x));
  return _mm256_fmsub_ps(two, s, _mm256_set1_ps(1.0f));
}

template <class Fn>
inline void map_f32(int n, const float* x, float* y, Fn fn) {
  int i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, fn(_mm256_loadu_ps(x + i)));
  if (i < n) {
    alignas(32) float buf[8] = {0};
    for (int t = i; t < n; ++t) buf[t - i] = x[t];
    alignas(32) float out[8];
    _mm256_store_ps(out, fn(_mm256_load_ps(buf)));
    for (int t = i; t < n; ++t) y[t] = out[t - i];
  }
}

}  // namespace

template <>
void vexp<float>(int n, const float* x, float* y) {
  map_f32(n, x, y, [](__m256 v) { return exp256(v); });
}
template <>
void vexp<double>(int n, const double* x, double* y) {
  scalar::vexp(n, x, y);
}

template <>
void vtanh<float>(int n, const float* x, float* y) {
  map_f32(n, x, y, [](__m256 v) { return tanh256(v); });
}
template <>
void vtanh<double>(int n, const double* x, double* y) {
  scalar::vtanh(n, x, y);
}

template <>
void vsigmoid<float>(int n, const float* x, float* y) {
  map_f32(n, x, y, [](__m256 v) { return sigmoid256(v); });
}
template <>
void vsigmoid<double>(int n, const double* x, double* y) {
  scalar::vsigmoid(n, x, y);
}

template <class S>
void vadd(int n, const S* a, const S* b, S* y) {
  using T = Vec<S>;
  int i = 0;
  for (; i + T::kW <= n; i += T::kW)
    T::store(y + i, T::add(T::load(a + i), T::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

template <class S>
void vsub(int n, const S* a, const S* b, S* y) {
  using T = Vec<S>;
  int i = 0;
  for (; i + T::kW <= n; i += T::kW)
    T::store(y + i, T::sub(T::load(a + i), T::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

template <class S>
void vmul(int n, const S* a, const S* b, S* y) {
  using T = Vec<S>;
  int i = 0;
  for (; i + T::kW <= n; i += T::kW)
    T::store(y + i, T::mul(T::load(a + i), T::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

template <class S>
void vaxpy(int n, S alpha, const S* x, S* y) {
  using T = Vec<S>;
  const auto av = T::set1(alpha);
  int i = 0;
  for (; i + T::kW <= n; i += T::kW)
    T::store(y + i, T::fmadd(av, T::load(x + i), T::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
void vscale(int n, S alpha, const S* x, S beta, S* y) {
  using T = Vec<S>;
  const auto av = T::set1(alpha);
  const auto bv = T::set1(beta);
  int i = 0;
  for (; i + T::kW <= n; i += T::kW)
    T::store(y + i, T::fmadd(av, T::load(x + i), bv));
  for (; i < n; ++i) y[i] = alpha * x[i] + beta;
}

template <class S>
S vsum(int n, const S* x) {
  using T = Vec<S>;
  auto acc = T::zero();
  int i = 0;
  for (; i + T::kW <= n; i += T::kW) acc = T::add(acc, T::load(x + i));
  S total = T::hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

template <class S>
S vdot(int n, const S* a, const S* b) {
  using T = Vec<S>;
  auto acc = T::zero();
  int i = 0;
  for (; i + T::kW <= n; i += T::kW)
    acc = T::fmadd(T::load(a + i), T::load(b + i), acc);
  S total = T::hsum(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

template <class S>
void colsum(int m, int n, const S* a, int lda, S* out, bool accumulate) {
  using T = Vec<S>;
  if (!accumulate) {
    for (int j = 0; j < n; ++j) out[j] = S(0);
  }
  const int nv = n - n % T::kW;
  for (int i = 0; i < m; ++i) {
    const S* arow = a + (size_t)i * lda;
    int j = 0;
    for (; j < nv; j += T::kW)
      T::store(out + j, T::add(T::load(out + j), T::load(arow + j)));
    for (; j < n; ++j) out[j] += arow[j];
  }
}

namespace {

inline __m256 sqrt_v(__m256 x) { return _mm256_sqrt_ps(x); }
inline __m256d sqrt_v(__m256d x) { return _mm256_sqrt_pd(x); }
inline __m256 div_v(__m256 a, __m256 b) { return _mm256_div_ps(a, b); }
inline __m256d div_v(__m256d a, __m256d b) { return _mm256_div_pd(a, b); }

}  // namespace

template <class S>
void adam_step(int n, S* p, const S* g, S* m, S* v, S beta1, S beta2, S eps,
               S lr, S bc1, S bc2, bool adaptive, S rect) {
  using T = Vec<S>;
  const auto b1 = T::set1(beta1);
  const auto o_b1 = T::set1(S(1) - beta1);
  const auto b2 = T::set1(beta2);
  const auto o_b2 = T::set1(S(1) - beta2);
  const auto epsv = T::set1(eps);
  const auto bc1v = T::set1(bc1);
  const auto bc2v = T::set1(bc2);
  const auto stepv = T::set1(adaptive ? lr * rect : lr);
  int i = 0;
  for (; i + T::kW <= n; i += T::kW) {
    auto gv = T::load(g + i);
    auto mv = T::fmadd(o_b1, gv, T::mul(b1, T::load(m + i)));
    auto vv = T::fmadd(o_b2, T::mul(gv, gv), T::mul(b2, T::load(v + i)));
    T::store(m + i, mv);
    T::store(v + i, vv);
    auto mhat = T::mul(mv, bc1v);
    auto upd = adaptive
                   ? div_v(T::mul(stepv, mhat),
                           T::add(sqrt_v(T::mul(vv, bc2v)), epsv))
                   : T::mul(stepv, mhat);
    T::store(p + i, T::sub(T::load(p + i), upd));
  }
  if (i < n)
    scalar::adam_step(n - i, p + i, g + i, m + i, v + i, beta1, beta2, eps, lr,
                      bc1, bc2, adaptive, rect);
}

#define SPRL_INSTANTIATE(S)                                                   \
  template void gemm_nn<S>(int, int, int, const S*, int, const S*, int, S*,   \
                           int, bool);                                        \
  template void gemm_nt<S>(int, int, int, const S*, int, const S*, int, S*,   \
                           int, bool);                                        \
  template void gemm_tn<S>(int, int, int, const S*, int, const S*, int, S*,   \
                           int, bool);                                        \
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

}  // namespace sprl::kernels::avx2

#endif  // SPRL_HAVE_AVX2_BUILD
