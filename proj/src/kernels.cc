#include "ftm/kernels.h"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace ftm::kernels {
namespace {

Isa detect() {
  if (const char* env = std::getenv("FTM_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::kScalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Isa::kAvx2;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool has = __builtin_cpu_supports("avx2") &&
                          __builtin_cpu_supports("fma");
  return has;
#else
  return false;
#endif
}

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !cpu_has_avx2()) isa = Isa::kScalar;
  selected().store(isa, std::memory_order_relaxed);
}

std::string isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  if (active_isa() == Isa::kAvx2)
    avx2::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    scalar::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  if (active_isa() == Isa::kAvx2)
    avx2::gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    scalar::gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
  if (active_isa() == Isa::kAvx2)
    avx2::gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    scalar::gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  return active_isa() == Isa::kAvx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  if (active_isa() == Isa::kAvx2)
    avx2::axpy(n, alpha, x, y);
  else
    scalar::axpy(n, alpha, x, y);
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

}  // namespace ftm::kernels
