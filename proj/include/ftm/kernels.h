// Dense linear-algebra inner loops used by every tensor op.
//
// Each kernel has a portable scalar reference and an AVX2/FMA variant. The
// variant is chosen once at startup from the CPU feature bits and can be
// overridden with FTM_KERNELS=scalar|avx2 or force_isa(). All kernels compute
// every output element with a fixed, shape-independent accumulation order, so
// a row of C does not depend on how many other rows are computed alongside it.

#ifndef FTM_KERNELS_H_
#define FTM_KERNELS_H_

#include <cstddef>
#include <string>

namespace ftm::kernels {

enum class Isa { kScalar, kAvx2 };

Isa active_isa();
void force_isa(Isa isa);
bool cpu_has_avx2();
std::string isa_name(Isa isa);

// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);

template <typename T>
T dot(const T* a, const T* b, std::size_t n);

// y += alpha * x
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);

// Per-ISA entry points. Exposed so equivalence tests can call both sides
// directly without going through the dispatcher.
namespace scalar {
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
T dot(const T* a, const T* b, std::size_t n);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
}  // namespace scalar

namespace avx2 {
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);
template <typename T>
T dot(const T* a, const T* b, std::size_t n);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
}  // namespace avx2

}  // namespace ftm::kernels

#endif  // FTM_KERNELS_H_
