#include "taillight/attention/spatial.hpp"

#include <cmath>
#include <string>

#include "taillight/autodiff/ops.hpp"

namespace taillight {

template <typename T>
SpatialAttention<T>::SpatialAttention(std::size_t channels, std::size_t hidden_size, std::size_t attn_hidden)
    : channels_(channels), hidden_size_(hidden_size), attn_hidden_(attn_hidden) {
  if (channels == 0 || hidden_size == 0 || attn_hidden == 0) {
    throw ShapeError("spatial attention: dimensions must be positive");
  }
}

template <typename T>
void SpatialAttention<T>::init(ParamStore<T>& store, std::mt19937_64& rng) const {
  const T phi_bound = T(1) / std::sqrt(static_cast<T>(channels_));
  store.set("spatial.phi1", uniform_tensor<T>({channels_, channels_, 1, 1}, phi_bound, rng));
  store.set("spatial.phi2", uniform_tensor<T>({1, channels_, 1, 1}, phi_bound, rng));
  store.set("spatial.W_a_z", dense_weight<T>(attn_hidden_, 1, rng));
  store.set("spatial.W_a_h", dense_weight<T>(attn_hidden_, hidden_size_, rng));
  store.set("spatial.b_a_zh", Tensor<T>::zeros({attn_hidden_}));
  store.set("spatial.W_a", dense_weight<T>(1, attn_hidden_, rng));
  store.set("spatial.b_a", Tensor<T>::zeros({1}));
}

template <typename T>
Tensor<T> SpatialAttention<T>::scores(const ParamView<T>& p, const Tensor<T>& z_l, const Tensor<T>& h_prev) const {
  if (z_l.rank() != 3 || z_l.dim(0) != channels_) {
    throw ShapeError("spatial attention expects [" + std::to_string(channels_) + ",H,W] features, got " +
                     to_string(z_l.shape()));
  }
  if (h_prev.shape() != Shape{hidden_size_}) {
    throw ShapeError("spatial attention expects h of [" + std::to_string(hidden_size_) + "], got " +
                     to_string(h_prev.shape()));
  }
  const std::size_t height = z_l.dim(1);
  const std::size_t width = z_l.dim(2);
  const auto m = conv2d(conv2d(z_l, p("spatial.phi1"), 1, 0), p("spatial.phi2"), 1, 0);
  const auto per_cell = matmul(reshape(m, Shape{height * width, 1}), p("spatial.W_a_z"), false, true);
  const auto shared = linear(h_prev, p("spatial.W_a_h"), p("spatial.b_a_zh"));
  const auto hidden = tanh(add(per_cell, shared));
  return reshape(linear(hidden, p("spatial.W_a"), p("spatial.b_a")), Shape{height, width});
}

template <typename T>
Tensor<T> SpatialAttention<T>::weights(const Tensor<T>& scores) {
  if (scores.rank() != 2) throw ShapeError("spatial weights expect a [H,W] score map, got " + to_string(scores.shape()));
  return softmax(scores, -1);
}

template <typename T>
Tensor<T> SpatialAttention<T>::apply(const Tensor<T>& z_l, const Tensor<T>& alpha) {
  if (z_l.rank() != 3 || alpha.rank() != 2 || z_l.dim(1) != alpha.dim(0) || z_l.dim(2) != alpha.dim(1)) {
    throw ShapeError("apply_spatial: grid of " + to_string(alpha.shape()) + " does not match features " +
                     to_string(z_l.shape()));
  }
  return mul(z_l, reshape(alpha, Shape{1, alpha.dim(0), alpha.dim(1)}));
}

template <typename T>
Tensor<T> SpatialAttention<T>::uniform(std::size_t height, std::size_t width) {
  return Tensor<T>::filled({height, width}, T(1) / static_cast<T>(height * width));
}

template class SpatialAttention<float>;
template class SpatialAttention<double>;

}  // namespace taillight
