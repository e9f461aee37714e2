#pragma once

#include <cstddef>
#include <random>

#include "taillight/autodiff/tensor.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

// Region selection over the split-layer grid.
//
// Two 1x1 convolutions (phi1: d->d, phi2: d->1, no nonlinearity between them)
// reduce z_l to a scalar map m. Each cell is scored by additive attention in a
// k-dimensional space, with the projection of h_{t-1} shared by all cells:
//
//   a(i,j) = W_a . tanh(W_a_z m(i,j) + W_a_h h_{t-1} + b_a_zh) + b_a
//
// and alpha = softmax over all cells.
template <typename T>
class SpatialAttention {
 public:
  SpatialAttention(std::size_t channels, std::size_t hidden_size, std::size_t attn_hidden);

  std::size_t channels() const { return channels_; }
  std::size_t attn_hidden() const { return attn_hidden_; }

  void init(ParamStore<T>& store, std::mt19937_64& rng) const;

  // z_l [d,H,W], h_prev [hidden] -> scores [H,W]
  Tensor<T> scores(const ParamView<T>& p, const Tensor<T>& z_l, const Tensor<T>& h_prev) const;
  // [H,W] -> [H,W], nonnegative, sums to 1
  static Tensor<T> weights(const Tensor<T>& scores);
  // z_l [d,H,W] * alpha [H,W] broadcast over channels
  static Tensor<T> apply(const Tensor<T>& z_l, const Tensor<T>& alpha);
  // Every cell 1/(H*W).
  static Tensor<T> uniform(std::size_t height, std::size_t width);

 private:
  std::size_t channels_;
  std::size_t hidden_size_;
  std::size_t attn_hidden_;
};

}  // namespace taillight
