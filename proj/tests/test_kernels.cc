#include <array>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <doctest.h>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/kernels/kernels.h"

namespace k = sprl::kernels;

namespace {

// Restores the process-global backend selection on scope exit.
struct BackendGuard {
  k::Backend saved = k::backend();
  ~BackendGuard() { k::set_backend(saved); }
};

template <class S>
std::vector<S> random_vec(sprl::Rng& rng, int n, S lo = S(-1), S hi = S(1)) {
  std::vector<S> v(n);
  for (auto& x : v) x = sprl::uniform(rng, double(lo), double(hi));
  return v;
}

// Naive triple-loop oracle in double, independent of the kernel code paths.
enum class Layout { NN, NT, TN };

template <class S>
std::vector<double> gemm_oracle(Layout layout, int m, int n, int kk,
                                const std::vector<S>& a, int lda,
                                const std::vector<S>& b, int ldb,
                                const std::vector<S>& c0, int ldc,
                                bool accumulate) {
  std::vector<double> c(size_t(m) * ldc, 0.0);
  for (size_t i = 0; i < c.size(); ++i) c[i] = double(c0[i]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < kk; ++p) {
        double av = layout == Layout::TN ? double(a[size_t(p) * lda + i])
                                         : double(a[size_t(i) * lda + p]);
        double bv = layout == Layout::NT ? double(b[size_t(j) * ldb + p])
                                         : double(b[size_t(p) * ldb + j]);
        acc += av * bv;
      }
      c[size_t(i) * ldc + j] = accumulate ? c[size_t(i) * ldc + j] + acc : acc;
    }
  return c;
}

template <class S>
void check_gemm(Layout layout, int m, int n, int kk, bool accumulate,
                uint64_t seed) {
  auto rng = sprl::make_rng(seed);
  // Leading dimensions with slack so stride handling is exercised.
  int lda = (layout == Layout::TN ? m : kk) + 3;
  int ldb = (layout == Layout::NT ? kk : n) + 2;
  int ldc = n + 1;
  int arows = layout == Layout::TN ? kk : m;
  int brows = layout == Layout::NT ? n : kk;
  auto a = random_vec<S>(rng, arows * lda);
  auto b = random_vec<S>(rng, brows * ldb);
  auto c0 = random_vec<S>(rng, m * ldc);
  auto want = gemm_oracle(layout, m, n, kk, a, lda, b, ldb, c0, ldc,
                          accumulate);

  auto c = c0;
  switch (layout) {
    case Layout::NN:
      k::gemm_nn(m, n, kk, a.data(), lda, b.data(), ldb, c.data(), ldc,
                 accumulate);
      break;
    case Layout::NT:
      k::gemm_nt(m, n, kk, a.data(), lda, b.data(), ldb, c.data(), ldc,
                 accumulate);
      break;
    case Layout::TN:
      k::gemm_tn(m, n, kk, a.data(), lda, b.data(), ldb, c.data(), ldc,
                 accumulate);
      break;
  }

  double tol = (std::is_same_v<S, float> ? 1e-5 : 1e-12) * (kk + 1);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double got = double(c[size_t(i) * ldc + j]);
      CAPTURE(i);
      CAPTURE(j);
      REQUIRE(std::abs(got - want[size_t(i) * ldc + j]) <= tol);
    }
  // Slack columns beyond n must be untouched.
  for (int i = 0; i < m; ++i)
    REQUIRE(double(c[size_t(i) * ldc + n]) ==
            doctest::Approx(double(c0[size_t(i) * ldc + n])));
}

template <class S>
void check_gemm_all_layouts(k::Backend backend) {
  BackendGuard guard;
  k::set_backend(backend);
  uint64_t seed = 100;
  const std::vector<std::array<int, 3>> shapes = {
      {1, 1, 1},  {1, 9, 4},   {4, 8, 16},  {5, 17, 7},
      {8, 16, 32}, {9, 33, 13}, {16, 10, 3}, {33, 2, 5}};
  for (Layout layout : {Layout::NN, Layout::NT, Layout::TN})
    for (auto [m, n, kk] : shapes)
      for (bool acc : {false, true})
        check_gemm<S>(layout, m, n, kk, acc, seed++);
}

}  // namespace

TEST_CASE("kernels: backend selection") {
  BackendGuard guard;
  k::set_backend(k::Backend::kScalar);
  REQUIRE(k::backend() == k::Backend::kScalar);
  REQUIRE(std::string(k::backend_name()) == "scalar");
  if (k::avx2_available()) {
    k::set_backend(k::Backend::kAvx2);
    REQUIRE(k::backend() == k::Backend::kAvx2);
    REQUIRE(std::string(k::backend_name()) == "avx2");
  } else {
    REQUIRE_THROWS_AS(k::set_backend(k::Backend::kAvx2), sprl::UsageError);
  }
}

TEST_CASE("kernels: gemm matches naive oracle (scalar)") {
  check_gemm_all_layouts<float>(k::Backend::kScalar);
  check_gemm_all_layouts<double>(k::Backend::kScalar);
}

TEST_CASE("kernels: gemm matches naive oracle (avx2)") {
  if (!k::avx2_available()) return;
  check_gemm_all_layouts<float>(k::Backend::kAvx2);
  check_gemm_all_layouts<double>(k::Backend::kAvx2);
}

namespace {

template <class S, class Fn, class Ref>
void check_elementwise(Fn fn, Ref ref, double lo, double hi, double atol,
                       double rtol) {
  BackendGuard guard;
  auto rng = sprl::make_rng(7);
  for (int n : {1, 3, 8, 13, 64, 257}) {
    auto x = random_vec<S>(rng, n, S(lo), S(hi));
    std::vector<S> ys(n), yv(n);
    k::set_backend(k::Backend::kScalar);
    fn(n, x.data(), ys.data());
    for (int i = 0; i < n; ++i) {
      double want = ref(double(x[i]));
      REQUIRE(std::abs(double(ys[i]) - want) <=
              atol + rtol * std::abs(want));
    }
    if (!k::avx2_available()) continue;
    k::set_backend(k::Backend::kAvx2);
    fn(n, x.data(), yv.data());
    for (int i = 0; i < n; ++i) {
      CAPTURE(double(x[i]));
      REQUIRE(std::abs(double(yv[i]) - double(ys[i])) <=
              atol + rtol * std::abs(double(ys[i])));
    }
  }
}

}  // namespace

TEST_CASE("kernels: transcendentals match libm and agree across backends") {
  auto vtanh = [](int n, const auto* x, auto* y) { k::vtanh(n, x, y); };
  auto vsig = [](int n, const auto* x, auto* y) { k::vsigmoid(n, x, y); };
  auto vexp = [](int n, const auto* x, auto* y) { k::vexp(n, x, y); };
  check_elementwise<float>(vtanh, [](double v) { return std::tanh(v); }, -12,
                           12, 1e-6, 3e-5);
  check_elementwise<float>(vsig,
                           [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                           -30, 30, 1e-7, 3e-5);
  check_elementwise<float>(vexp, [](double v) { return std::exp(v); }, -20, 20,
                           1e-30, 3e-5);
  check_elementwise<double>(vtanh, [](double v) { return std::tanh(v); }, -12,
                            12, 1e-12, 1e-12);
  check_elementwise<double>(
      vsig, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, -30, 30,
      1e-15, 1e-12);
  check_elementwise<double>(vexp, [](double v) { return std::exp(v); }, -20,
                            20, 1e-300, 1e-12);
}

TEST_CASE("kernels: exp saturates instead of overflowing (float)") {
  BackendGuard guard;
  for (auto backend : {k::Backend::kScalar, k::Backend::kAvx2}) {
    if (backend == k::Backend::kAvx2 && !k::avx2_available()) continue;
    k::set_backend(backend);
    float x[4] = {-1000.f, -89.f, 88.f, 1000.f};
    float y[4];
    k::vexp(4, x, y);
    REQUIRE(y[0] >= 0.f);
    REQUIRE(y[0] <= 1e-37f);
    REQUIRE(std::isfinite(y[2]));
    REQUIRE(std::isfinite(y[3]));
    REQUIRE(y[3] >= 1e37f);
  }
}

namespace {

template <class S>
void check_arith_backend_equivalence() {
  if (!k::avx2_available()) return;
  BackendGuard guard;
  auto rng = sprl::make_rng(42);
  for (int n : {1, 7, 8, 9, 64, 100}) {
    auto a = random_vec<S>(rng, n);
    auto b = random_vec<S>(rng, n);
    auto run = [&](k::Backend backend) {
      k::set_backend(backend);
      std::vector<std::vector<S>> out;
      std::vector<S> y(n);
      k::vadd(n, a.data(), b.data(), y.data());
      out.push_back(y);
      k::vsub(n, a.data(), b.data(), y.data());
      out.push_back(y);
      k::vmul(n, a.data(), b.data(), y.data());
      out.push_back(y);
      y = b;
      k::vaxpy(n, S(0.37), a.data(), y.data());
      out.push_back(y);
      y = b;
      k::vscale(n, S(1.25), a.data(), S(-0.5), y.data());
      out.push_back(y);
      out.push_back({k::vsum(n, a.data())});
      out.push_back({k::vdot(n, a.data(), b.data())});
      return out;
    };
    auto s = run(k::Backend::kScalar);
    auto v = run(k::Backend::kAvx2);
    REQUIRE(s.size() == v.size());
    double tol = std::is_same_v<S, float> ? 1e-5 * n : 1e-13 * n;
    for (size_t op = 0; op < s.size(); ++op)
      for (size_t i = 0; i < s[op].size(); ++i)
        REQUIRE(std::abs(double(s[op][i]) - double(v[op][i])) <= tol);
  }
}

}  // namespace

TEST_CASE("kernels: arithmetic ops agree across backends") {
  check_arith_backend_equivalence<float>();
  check_arith_backend_equivalence<double>();
}

TEST_CASE("kernels: arithmetic ops match direct loops (scalar)") {
  BackendGuard guard;
  k::set_backend(k::Backend::kScalar);
  auto rng = sprl::make_rng(3);
  int n = 17;
  auto a = random_vec<double>(rng, n);
  auto b = random_vec<double>(rng, n);
  std::vector<double> y(n);
  k::vadd(n, a.data(), b.data(), y.data());
  for (int i = 0; i < n; ++i) REQUIRE(y[i] == doctest::Approx(a[i] + b[i]));
  y = b;
  k::vaxpy(n, 2.5, a.data(), y.data());
  for (int i = 0; i < n; ++i)
    REQUIRE(y[i] == doctest::Approx(b[i] + 2.5 * a[i]));
  k::vscale(n, 0.5, a.data(), 2.0, y.data());
  for (int i = 0; i < n; ++i)
    REQUIRE(y[i] == doctest::Approx(0.5 * a[i] + 2.0));
  double s = 0.0, d = 0.0;
  for (int i = 0; i < n; ++i) {
    s += a[i];
    d += a[i] * b[i];
  }
  REQUIRE(k::vsum(n, a.data()) == doctest::Approx(s));
  REQUIRE(k::vdot(n, a.data(), b.data()) == doctest::Approx(d));
}

TEST_CASE("kernels: colsum") {
  BackendGuard guard;
  auto rng = sprl::make_rng(5);
  int m = 9, n = 13, lda = n + 2;
  auto a = random_vec<double>(rng, m * lda);
  std::vector<double> want(n, 0.25);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) want[j] += a[size_t(i) * lda + j];
  for (auto backend : {k::Backend::kScalar, k::Backend::kAvx2}) {
    if (backend == k::Backend::kAvx2 && !k::avx2_available()) continue;
    k::set_backend(backend);
    std::vector<double> out(n, 0.25);
    k::colsum(m, n, a.data(), lda, out.data(), /*accumulate=*/true);
    for (int j = 0; j < n; ++j) REQUIRE(out[j] == doctest::Approx(want[j]));
    k::colsum(m, n, a.data(), lda, out.data(), /*accumulate=*/false);
    for (int j = 0; j < n; ++j)
      REQUIRE(out[j] == doctest::Approx(want[j] - 0.25));
  }
}

namespace {

// Per-element reference for one optimizer step, in double.
struct AdamRef {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 1e-3;
  double bc1 = 1.0, bc2 = 1.0;
  bool adaptive = true;
  double rect = 1.0;
  void step(double& p, double g, double& m, double& v) const {
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    if (adaptive)
      p -= lr * rect * (m * bc1) / (std::sqrt(v * bc2) + eps);
    else
      p -= lr * (m * bc1);
  }
};

}  // namespace

TEST_CASE("kernels: adam_step matches reference and agrees across backends") {
  BackendGuard guard;
  auto rng = sprl::make_rng(11);
  int n = 37;
  auto p0 = random_vec<double>(rng, n);
  auto g = random_vec<double>(rng, n);
  auto m0 = random_vec<double>(rng, n, 0.0, 0.1);
  auto v0 = random_vec<double>(rng, n, 0.0, 0.1);
  for (bool adaptive : {true, false}) {
    AdamRef ref;
    ref.adaptive = adaptive;
    ref.bc1 = 1.0 / (1.0 - 0.9);
    ref.bc2 = 1.0 / (1.0 - 0.999);
    ref.rect = adaptive ? 0.7 : 1.0;
    auto pw = p0, mw = m0, vw = v0;
    for (int i = 0; i < n; ++i) ref.step(pw[i], g[i], mw[i], vw[i]);
    for (auto backend : {k::Backend::kScalar, k::Backend::kAvx2}) {
      if (backend == k::Backend::kAvx2 && !k::avx2_available()) continue;
      k::set_backend(backend);
      auto p = p0, m = m0, v = v0;
      k::adam_step(n, p.data(), g.data(), m.data(), v.data(), ref.beta1,
                   ref.beta2, ref.eps, ref.lr, ref.bc1, ref.bc2, adaptive,
                   ref.rect);
      for (int i = 0; i < n; ++i) {
        REQUIRE(p[i] == doctest::Approx(pw[i]).epsilon(1e-12));
        REQUIRE(m[i] == doctest::Approx(mw[i]).epsilon(1e-12));
        REQUIRE(v[i] == doctest::Approx(vw[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("kernels: adam_step with zero gradient from fresh state is a no-op") {
  BackendGuard guard;
  auto rng = sprl::make_rng(13);
  int n = 16;
  auto p0 = random_vec<float>(rng, n);
  std::vector<float> g(n, 0.f), m(n, 0.f), v(n, 0.f);
  for (auto backend : {k::Backend::kScalar, k::Backend::kAvx2}) {
    if (backend == k::Backend::kAvx2 && !k::avx2_available()) continue;
    k::set_backend(backend);
    auto p = p0;
    k::adam_step(n, p.data(), g.data(), m.data(), v.data(), 0.9f, 0.999f,
                 1e-8f, 1e-3f, 10.f, 1000.f, true, 1.f);
    for (int i = 0; i < n; ++i) REQUIRE(p[i] == p0[i]);
  }
}
