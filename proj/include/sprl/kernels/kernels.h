#pragma once

#include <cstddef>

// Data-parallel inner loops used by the autodiff graph and the optimizers.
// Every kernel has a scalar reference implementation and (on x86-64) an AVX2
// variant; the active backend is selected at runtime. All matrices are
// row-major. The two backends are equivalence-tested against each other.
//
// Double-precision transcendentals (vtanh/vsigmoid/vexp) always run the
// scalar path: the f64 mode exists for gradient verification, where libm
// accuracy is worth more than throughput.

namespace sprl::kernels {

enum class Backend { kScalar, kAvx2 };

// True if the CPU supports AVX2+FMA.
bool avx2_available();

Backend backend();
const char* backend_name();

// Throws UsageError if the requested backend is not supported on this CPU.
// The initial backend is the best supported one, unless the environment
// variable SPRL_KERNEL_BACKEND is set to "scalar" or "avx2".
void set_backend(Backend b);

// C[m,n] = A[m,k] * B[k,n]   (+= if accumulate)
template <class S>
void gemm_nn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate);

// C[m,n] = A[m,k] * B[n,k]^T
template <class S>
void gemm_nt(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate);

// C[m,n] = A[k,m]^T * B[k,n]
template <class S>
void gemm_tn(int m, int n, int k, const S* a, int lda, const S* b, int ldb,
             S* c, int ldc, bool accumulate);

// Elementwise over n contiguous values; in-place (y == x) is allowed.
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
// y += alpha * x
template <class S>
void vaxpy(int n, S alpha, const S* x, S* y);
// y = alpha * x + beta
template <class S>
void vscale(int n, S alpha, const S* x, S beta, S* y);

template <class S>
S vsum(int n, const S* x);
template <class S>
S vdot(int n, const S* a, const S* b);

// out[j] = sum_i a[i,j]   (+= if accumulate)
template <class S>
void colsum(int m, int n, const S* a, int lda, S* out, bool accumulate);

// Fused Adam/RAdam parameter update over n values.
//   m <- beta1*m + (1-beta1)*g
//   v <- beta2*v + (1-beta2)*g^2
//   adaptive: p -= lr * rect * (m*bc1) / (sqrt(v*bc2) + eps)
//   else:     p -= lr * (m*bc1)            (bias-corrected momentum step)
// bc1 = 1/(1-beta1^t), bc2 = 1/(1-beta2^t) are passed in by the caller.
template <class S>
void adam_step(int n, S* p, const S* g, S* m, S* v, S beta1, S beta2, S eps,
               S lr, S bc1, S bc2, bool adaptive, S rect);

}  // namespace sprl::kernels
