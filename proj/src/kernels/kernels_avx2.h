#pragma once

// AVX2+FMA variants. Only compiled on x86-64; only called after the runtime
// CPU check in dispatch.cc. f64 transcendentals fall through to the scalar
// reference (verification mode favors libm accuracy).

#if defined(__x86_64__) || defined(_M_X64)
#define SPRL_HAVE_AVX2_BUILD 1
#else
#define SPRL_HAVE_AVX2_BUILD 0
#endif

#if SPRL_HAVE_AVX2_BUILD

namespace sprl::kernels::avx2 {

template <class S>
void gemm_nn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate);
template <class S>
void gemm_nt(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate);
template <class S>
void gemm_tn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate);

template <class S>
void vtanh(int n, const S* x, S* y);
template <class S>
void vsigmoid(int n, const S* x, S* y);
template <class S>
void vexp(int n, const S* x, S* y);
template <class S>
void vadd(int n, const S* a, const S* b, S* y);
template <class S>
void vsub(int n, const S* a, const S* b, S* y);
template <class S>
void vmul(int n, const S* a, const S* b, S* y);
template <class S>
void vaxpy(int n, S alpha, const S* x, S* y);
template <class S>
void vscale(int n, S alpha, const S* x, S beta, S* y);
template <class S>
S vsum(int n, const S* x);
template <class S>
S vdot(int n, const S* a, const S* b);
template <class S>
void colsum(int m, int n, const S* a, int lda, S* out, bool accumulate);
template <class S>
void adam_step(int n, S* p, const S* g, S* m, S* v, S beta1, S beta2, S eps,
               S lr, S bc1, S bc2, bool adaptive, S rect);

}  // namespace sprl::kernels::avx2

#endif  // SPRL_HAVE_AVX2_BUILD
