// Compiled with -mavx2 -mfma. Never call these unless cpu_has_avx2().

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "ftm/kernels.h"

namespace ftm::kernels::avx2 {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr int kLanes = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr int kLanes = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// One row of C += a_row * B, vectorised over columns. Each element is an
// in-order FMA chain over p, identical for every row blocking.
// A element p of a row lives at ai[p * ap], so the same loop serves A and A^T.
template <typename T>
void row_nn(int n, int k, const T* ai, std::size_t ap, const T* b, int ldb,
            T* ci) {
  using V = Vec<T>;
  constexpr int L = V::kLanes;
  int j = 0;
  for (; j + 2 * L <= n; j += 2 * L) {
    auto c0 = V::load(ci + j), c1 = V::load(ci + j + L);
    for (int p = 0; p < k; ++p) {
      const T* bp = b + static_cast<std::size_t>(p) * ldb + j;
      const auto av = V::set1(ai[p * ap]);
      c0 = V::fma(av, V::load(bp), c0);
      c1 = V::fma(av, V::load(bp + L), c1);
    }
    V::store(ci + j, c0);
    V::store(ci + j + L, c1);
  }
  for (; j + L <= n; j += L) {
    auto c0 = V::load(ci + j);
    for (int p = 0; p < k; ++p)
      c0 = V::fma(V::set1(ai[p * ap]), V::load(b + static_cast<std::size_t>(p) * ldb + j), c0);
    V::store(ci + j, c0);
  }
  for (; j < n; ++j) {
    T s = ci[j];
    for (int p = 0; p < k; ++p)
      s = std::fma(ai[p * ap], b[static_cast<std::size_t>(p) * ldb + j], s);
    ci[j] = s;
  }
}

// Four rows at once sharing the B loads.
template <typename T>
void rows4_nn(int n, int k, const T* a, std::size_t as, std::size_t ap,
              const T* b, int ldb, T* c, int ldc) {
  using V = Vec<T>;
  constexpr int L = V::kLanes;
  const T* a0 = a;
  const T* a1 = a + as;
  const T* a2 = a + 2 * as;
  const T* a3 = a + 3 * as;
  T* c0p = c;
  T* c1p = c + ldc;
  T* c2p = c + 2 * static_cast<std::size_t>(ldc);
  T* c3p = c + 3 * static_cast<std::size_t>(ldc);
  int j = 0;
  for (; j + 2 * L <= n; j += 2 * L) {
    auto x00 = V::load(c0p + j), x01 = V::load(c0p + j + L);
    auto x10 = V::load(c1p + j), x11 = V::load(c1p + j + L);
    auto x20 = V::load(c2p + j), x21 = V::load(c2p + j + L);
    auto x30 = V::load(c3p + j), x31 = V::load(c3p + j + L);
    for (int p = 0; p < k; ++p) {
      const T* bp = b + static_cast<std::size_t>(p) * ldb + j;
      const auto b0 = V::load(bp), b1 = V::load(bp + L);
      auto av = V::set1(a0[p * ap]);
      x00 = V::fma(av, b0, x00);
      x01 = V::fma(av, b1, x01);
      av = V::set1(a1[p * ap]);
      x10 = V::fma(av, b0, x10);
      x11 = V::fma(av, b1, x11);
      av = V::set1(a2[p * ap]);
      x20 = V::fma(av, b0, x20);
      x21 = V::fma(av, b1, x21);
      av = V::set1(a3[p * ap]);
      x30 = V::fma(av, b0, x30);
      x31 = V::fma(av, b1, x31);
    }
    V::store(c0p + j, x00);
    V::store(c0p + j + L, x01);
    V::store(c1p + j, x10);
    V::store(c1p + j + L, x11);
    V::store(c2p + j, x20);
    V::store(c2p + j + L, x21);
    V::store(c3p + j, x30);
    V::store(c3p + j + L, x31);
  }
  if (j < n) {
    // Remaining columns reuse the single-row path on a column offset.
    row_nn(n - j, k, a0, ap, b + j, ldb, c0p + j);
    row_nn(n - j, k, a1, ap, b + j, ldb, c1p + j);
    row_nn(n - j, k, a2, ap, b + j, ldb, c2p + j);
    row_nn(n - j, k, a3, ap, b + j, ldb, c3p + j);
  }
}

}  // namespace

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i) {
      T* ci = c + static_cast<std::size_t>(i) * ldc;
      std::fill(ci, ci + n, T(0));
    }
  }
  int i = 0;
  for (; i + 4 <= m; i += 4)
    rows4_nn(n, k, a + static_cast<std::size_t>(i) * lda,
             static_cast<std::size_t>(lda), 1, b, ldb,
             c + static_cast<std::size_t>(i) * ldc, ldc);
  for (; i < m; ++i)
    row_nn(n, k, a + static_cast<std::size_t>(i) * lda, 1, b, ldb,
           c + static_cast<std::size_t>(i) * ldc);
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t L = V::kLanes;
  auto s0 = V::zero(), s1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * L <= n; i += 2 * L) {
    s0 = V::fma(V::load(a + i), V::load(b + i), s0);
    s1 = V::fma(V::load(a + i + L), V::load(b + i + L), s1);
  }
  for (; i + L <= n; i += L) s0 = V::fma(V::load(a + i), V::load(b + i), s0);
  T s = V::hsum(V::add(s0, s1));
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  using V = Vec<T>;
  constexpr int L = V::kLanes;
  const int kv = k - k % (2 * L);
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * lda;
    T* ci = c + static_cast<std::size_t>(i) * ldc;
    int j = 0;
    // Four dot products sharing the A loads; each keeps the lane layout and
    // tail order of dot().
    if (kv == k) {
      for (; j + 4 <= n; j += 4) {
        const T* b0 = b + static_cast<std::size_t>(j) * ldb;
        const T* b1 = b0 + ldb;
        const T* b2 = b1 + ldb;
        const T* b3 = b2 + ldb;
        auto s00 = V::zero(), s01 = V::zero(), s10 = V::zero(), s11 = V::zero();
        auto s20 = V::zero(), s21 = V::zero(), s30 = V::zero(), s31 = V::zero();
        for (int p = 0; p < kv; p += 2 * L) {
          const auto x0 = V::load(ai + p), x1 = V::load(ai + p + L);
          s00 = V::fma(x0, V::load(b0 + p), s00);
          s01 = V::fma(x1, V::load(b0 + p + L), s01);
          s10 = V::fma(x0, V::load(b1 + p), s10);
          s11 = V::fma(x1, V::load(b1 + p + L), s11);
          s20 = V::fma(x0, V::load(b2 + p), s20);
          s21 = V::fma(x1, V::load(b2 + p + L), s21);
          s30 = V::fma(x0, V::load(b3 + p), s30);
          s31 = V::fma(x1, V::load(b3 + p + L), s31);
        }
        const T r[4] = {V::hsum(V::add(s00, s01)), V::hsum(V::add(s10, s11)),
                        V::hsum(V::add(s20, s21)), V::hsum(V::add(s30, s31))};
        for (int q = 0; q < 4; ++q) ci[j + q] = accumulate ? ci[j + q] + r[q] : r[q];
      }
    }
    for (; j < n; ++j) {
      const T s = dot(ai, b + static_cast<std::size_t>(j) * ldb,
                      static_cast<std::size_t>(k));
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::size_t L = V::kLanes;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + L <= n; i += L) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i) {
      T* ci = c + static_cast<std::size_t>(i) * ldc;
      std::fill(ci, ci + n, T(0));
    }
  }
  const auto ap = static_cast<std::size_t>(lda);
  int i = 0;
  for (; i + 4 <= m; i += 4)
    rows4_nn(n, k, a + i, 1, ap, b, ldb, c + static_cast<std::size_t>(i) * ldc,
             ldc);
  for (; i < m; ++i)
    row_nn(n, k, a + i, ap, b, ldb, c + static_cast<std::size_t>(i) * ldc);
}

#define FTM_INSTANTIATE(T)                                                   \
  template void gemm_nn<T>(int, int, int, const T*, int, const T*, int, T*, \
                           int, bool);                                       \
  template void gemm_nt<T>(int, int, int, const T*, int, const T*, int, T*, \
                           int, bool);                                       \
  template void gemm_tn<T>(int, int, int, const T*, int, const T*, int, T*, \
                           int, bool);                                       \
  template T dot<T>(const T*, const T*, std::size_t);                        \
  template void axpy<T>(std::size_t, T, const T*, T*);

FTM_INSTANTIATE(float)
FTM_INSTANTIATE(double)
#undef FTM_INSTANTIATE

}  // namespace ftm::kernels::avx2
