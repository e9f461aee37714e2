#include "taillight/training/loss.hpp"

#include <algorithm>
#include <cmath>

#include "taillight/attention/temporal.hpp"
#include "taillight/autodiff/ops.hpp"
#include "taillight/error.hpp"

namespace taillight {

template <typename T>
std::vector<T> one_hot(TaillightState label) {
  std::vector<T> y(kClassCodes.size(), T(0));
  y[label.index()] = T(1);
  return y;
}

template <typename T>
Tensor<T> chunk_loss(const Tensor<T>& last_logits, TaillightState label) {
  return softmax_cross_entropy(last_logits, one_hot<T>(label));
}

template <typename T>
Tensor<T> chunk_loss(const Tensor<T>& last_logits, const std::vector<T>& target) {
  return softmax_cross_entropy(last_logits, target);
}

template <typename T>
std::vector<T> bootstrap_target(std::span<const T> logits, TaillightState label, double ratio, LossMode mode) {
  if (logits.size() != kClassCodes.size()) throw ShapeError("bootstrap_target expects 8 logits");
  std::vector<T> q(logits.size());
  if (mode == LossMode::kHardBootstrap) {
    q[argmax_class<T>(logits)] = T(1);
  } else {
    const T m = *std::max_element(logits.begin(), logits.end());
    T z = 0;
    for (std::size_t i = 0; i < q.size(); ++i) z += q[i] = std::exp(logits[i] - m);
    for (auto& v : q) v /= z;
  }
  auto y = one_hot<T>(label);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>((1 - ratio) * y[i] + ratio * q[i]);
  return y;
}

std::size_t bootstrap_count(std::size_t batch, double ratio) {
  if (!(ratio > 0 && ratio <= 1)) throw ConfigError("bootstrap ratio must be in (0, 1]");
  // 0.3 * 10 is 3.0000000000000004 in binary
  auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(batch) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(batch, 1));
}

template <typename T>
T bootstrapped_batch_loss(std::span<const T> losses, double ratio) {
  if (losses.empty()) throw DataError("bootstrapped loss of an empty batch");
  const std::size_t k = bootstrap_count(losses.size(), ratio);
  T total = 0;
  for (std::size_t i : top_k_indices<T>(losses, k)) total += losses[i];
  return total / static_cast<T>(k);
}

#define TAILLIGHT_INSTANTIATE_LOSS(T)                                                                        \
  template std::vector<T> one_hot<T>(TaillightState);                                                        \
  template Tensor<T> chunk_loss<T>(const Tensor<T>&, TaillightState);                                        \
  template Tensor<T> chunk_loss<T>(const Tensor<T>&, const std::vector<T>&);                                 \
  template std::vector<T> bootstrap_target<T>(std::span<const T>, TaillightState, double, LossMode);         \
  template T bootstrapped_batch_loss<T>(std::span<const T>, double);

TAILLIGHT_INSTANTIATE_LOSS(float)
TAILLIGHT_INSTANTIATE_LOSS(double)

}  // namespace taillight
