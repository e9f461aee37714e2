#pragma once

#include <cstddef>
#include <random>

#include "taillight/autodiff/tensor.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

// Frame selection over the LSTM outputs. Row t of every [T,hidden] matrix is
// time step t.
template <typename T>
class TemporalAttention {
 public:
  explicit TemporalAttention(std::size_t hidden_size);

  void init(ParamStore<T>& store, std::mt19937_64& rng) const;

  // d_t = W_d_h h_t + W_d_c tanh(c_t) + b_d_hc, for every row.
  Tensor<T> summaries(const ParamView<T>& p, const Tensor<T>& hidden, const Tensor<T>& cells) const;
  // beta = row_softmax(D H^T), beta[t,u] weighs h_u for output t.
  static Tensor<T> weights(const Tensor<T>& summaries, const Tensor<T>& hidden);
  // H' = beta H
  static Tensor<T> mix(const Tensor<T>& beta, const Tensor<T>& hidden);
  // Row t one-hot at t, so H' = H.
  static Tensor<T> identity(std::size_t steps);

 private:
  std::size_t hidden_size_;
};

// p_t = W_p tanh(W_p_h h'_t + W_p_c c_t + b_p_hc) + b_p, as class logits.
template <typename T>
class OutputHead {
 public:
  OutputHead(std::size_t hidden_size, std::size_t num_classes);

  std::size_t num_classes() const { return num_classes_; }
  void init(ParamStore<T>& store, std::mt19937_64& rng) const;
  // [T,hidden] x [T,hidden] -> [T,num_classes]
  Tensor<T> predict(const ParamView<T>& p, const Tensor<T>& mixed_hidden, const Tensor<T>& cells) const;

 private:
  std::size_t hidden_size_;
  std::size_t num_classes_;
};

// Index of the largest logit; ties go to the lowest index.
template <typename T>
std::size_t argmax_class(std::span<const T> logits);

}  // namespace taillight
