#pragma once

namespace ge2ae::mm {

// Dense double-precision matmul kernels. Built in their own translation unit
// with reassociation enabled so the reduction loops vectorize; results stay
// deterministic run-to-run within a build.

// C = A(NxK) * B(KxM); C is overwritten.
void nn(const double* A, const double* B, double* C, int N, int K, int M);

// C = A(NxK) * B(MxK)^T; C is overwritten.
void nt(const double* A, const double* B, double* C, int N, int K, int M);

// C = A(NxK)^T * G(NxM); C must be zero-initialized (accumulates).
void tn(const double* A, const double* G, double* C, int N, int K, int M);

}  // namespace ge2ae::mm
