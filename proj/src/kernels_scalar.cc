#include <algorithm>

#include "ftm/kernels.h"

namespace ftm::kernels::scalar {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) std::fill(ci, ci + n, T(0));
    const T* ai = a + static_cast<std::size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * lda;
    T* ci = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<std::size_t>(j) * ldb;
      T s = 0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
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
  for (int p = 0; p < k; ++p) {
    const T* ap = a + static_cast<std::size_t>(p) * lda;
    const T* bp = b + static_cast<std::size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const T av = ap[i];
      if (av == T(0)) continue;
      T* ci = c + static_cast<std::size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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

}  // namespace ftm::kernels::scalar
