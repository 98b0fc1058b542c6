#include "ge2ae/mm_kernels.hpp"

#include <cstddef>

namespace ge2ae::mm {

void nn(const double* A, const double* B, double* C, int N, int K, int M) {
  for (int i = 0; i < N; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * K;
    double* c = C + static_cast<std::size_t>(i) * M;
    {
      const double av = a[0];
      const double* b = B;
      for (int j = 0; j < M; ++j) c[j] = av * b[j];
    }
    for (int k = 1; k < K; ++k) {
      const double av = a[k];
      const double* b = B + static_cast<std::size_t>(k) * M;
      for (int j = 0; j < M; ++j) c[j] += av * b[j];
    }
  }
}

void nt(const double* A, const double* B, double* C, int N, int K, int M) {
  for (int i = 0; i < N; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * K;
    double* c = C + static_cast<std::size_t>(i) * M;
    for (int j = 0; j < M; ++j) {
      const double* b = B + static_cast<std::size_t>(j) * K;
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] = acc;
    }
  }
}

void tn(const double* A, const double* G, double* C, int N, int K, int M) {
  for (int i = 0; i < N; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * K;
    const double* g = G + static_cast<std::size_t>(i) * M;
    for (int k = 0; k < K; ++k) {
      const double av = a[k];
      double* c = C + static_cast<std::size_t>(k) * M;
      for (int j = 0; j < M; ++j) c[j] += av * g[j];
    }
  }
}

}  // namespace ge2ae::mm
