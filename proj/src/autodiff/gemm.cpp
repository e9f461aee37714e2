#include "gemm.hpp"

#include <Eigen/Core>

namespace taillight::detail {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void gemm_impl(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T beta,
               T* c) {
  using Map = Eigen::Map<const RowMatrix<T>>;
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Eigen::Map<RowMatrix<T>> out(c, M, N);
  if (beta == T(0)) {
    out.setZero();
  } else if (beta != T(1)) {
    out *= beta;
  }
  const Map lhs(a, ta ? K : M, ta ? M : K);
  const Map rhs(b, tb ? N : K, tb ? K : N);
  if (!ta && !tb) {
    out.noalias() += lhs * rhs;
  } else if (!ta && tb) {
    out.noalias() += lhs * rhs.transpose();
  } else if (ta && !tb) {
    out.noalias() += lhs.transpose() * rhs;
  } else {
    out.noalias() += lhs.transpose() * rhs.transpose();
  }
}

}  // namespace

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
          float beta, float* c) {
  gemm_impl(ta, tb, m, n, k, a, b, beta, c);
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double beta, double* c) {
  gemm_impl(ta, tb, m, n, k, a, b, beta, c);
}

}  // namespace taillight::detail
