#pragma once

#include <cstddef>

// Dense row-major kernels used by the conv and linear layers. Loop orders are
// fixed so results are bit-reproducible for a given binary.

namespace mvdet::nn::kernels {

inline double dot(const double* a, const double* b, std::size_t n) {
  // eight independent lanes, reduced pairwise in a fixed order
  double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) s[j] += a[i + j] * b[i + j];
  for (std::size_t j = 0; j < n - i; ++j) s[j] += a[i + j] * b[i + j];
  return ((s[0] + s[4]) + (s[1] + s[5])) + ((s[2] + s[6]) + (s[3] + s[7]));
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

/// C[m,n] += A[m,k] * B[k,n]
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A,
                    const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      if (a == 0.0) continue;
      axpy(a, B + p * n, c, n);
    }
  }
}

/// C[m,n] += A[m,k] * B[n,k]^T
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A,
                    const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] += dot(A + i * k, B + j * k, k);
}

/// C[m,n] += A[k,m]^T * B[k,n]
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* A,
                    const double* B, double* C) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* b = B + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = A[p * m + i];
      if (a == 0.0) continue;
      axpy(a, b, C + i * n, n);
    }
  }
}

}  // namespace mvdet::nn::kernels
