#pragma once

#include <cstddef>
#include <vector>

#include "taillight/autodiff/tape.hpp"
#include "taillight/autodiff/tensor.hpp"

namespace taillight {

// Debug sweep: when enabled every op checks its output for NaN/Inf and throws
// NumericError naming the op. Off by default.
void set_finite_check(bool enabled);
bool finite_check_enabled();

// Bumped by relu whenever kink tracking is on; lets finite-difference probes
// detect that a perturbation crossed an activation boundary.
void set_kink_tracking(bool enabled);
std::uint64_t kink_signature();
void reset_kink_signature();

// Numpy-style: trailing alignment, size-1 extents expand.
Shape broadcast_shape(const Shape& a, const Shape& b);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);

// 2-D only; optional transposes of either operand.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_a = false, bool transpose_b = false);
// x[N,in] or x[in], weight[out,in], bias[out] (may be undefined).
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);

// Max-subtracted. axis < 0 normalizes over every element.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T>
Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdims = false);
template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool keepdims = false);

template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
// New leading axis; all parts share one shape.
template <typename T> Tensor<T> stack(const std::vector<Tensor<T>>& parts);
// Index along axis 0, dropping it.
template <typename T> Tensor<T> select(const Tensor<T>& x, std::size_t index);

// input [C,H,W] or [N,C,H,W], kernel [O,C,kH,kW]; output keeps input rank.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride, std::size_t pad);

// -sum_k target_k * log softmax(logits)_k over a [C] vector; target is a
// probability vector and receives no gradient.
template <typename T> Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<T>& target);

// Mean of the k largest entries of a [B] vector; ties keep the lower index.
template <typename T> Tensor<T> mean_top_k(const Tensor<T>& x, std::size_t k);
// Indices of the k largest values, descending, ties to the lower index.
template <typename T> std::vector<std::size_t> top_k_indices(std::span<const T> values, std::size_t k);

}  // namespace taillight
