#pragma once

#include <cstddef>

namespace taillight::detail {

// C[M,N] = beta * C + op(A) * op(B), all dense row-major.
// A is stored [M,K] (or [K,M] when transpose_a), B is [K,N] (or [N,K]).
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k, const float* a,
          const float* b, float beta, float* c);
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c);

}  // namespace taillight::detail
