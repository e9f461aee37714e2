#pragma once

#include <cstddef>
#include <random>

#include "taillight/autodiff/tensor.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

// Single-layer LSTM cell. Every gate reads [z_f ; h_{t-1}]:
//   i = sigmoid(W_i x + b_i), f = sigmoid(W_f x + b_f), o = sigmoid(W_o x + b_o)
//   g = tanh(W_g x + b_g),    c = f*c_prev + i*g,        h = o*tanh(c)
template <typename T>
class Lstm {
 public:
  Lstm(std::size_t input_dim, std::size_t hidden_size);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_size() const { return hidden_size_; }

  // Forget-gate bias starts at +1, other biases at 0.
  void init(ParamStore<T>& store, std::mt19937_64& rng) const;
  LstmState<T> zero_state() const;
  LstmState<T> step(const ParamView<T>& p, const Tensor<T>& z_f, const LstmState<T>& prev) const;

 private:
  std::size_t input_dim_;
  std::size_t hidden_size_;
};

}  // namespace taillight
