#include "taillight/nn/lstm.hpp"

#include <string>

#include "taillight/autodiff/ops.hpp"

namespace taillight {

template <typename T>
Lstm<T>::Lstm(std::size_t input_dim, std::size_t hidden_size) : input_dim_(input_dim), hidden_size_(hidden_size) {
  if (input_dim == 0 || hidden_size == 0) throw ShapeError("lstm: dimensions must be positive");
}

template <typename T>
void Lstm<T>::init(ParamStore<T>& store, std::mt19937_64& rng) const {
  const std::size_t cols = input_dim_ + hidden_size_;
  for (const char* gate : {"i", "f", "o", "g"}) {
    store.set(std::string("lstm.W_") + gate, dense_weight<T>(hidden_size_, cols, rng));
  }
  for (const char* gate : {"i", "f", "o", "g"}) {
    const T value = std::string(gate) == "f" ? T(1) : T(0);
    store.set(std::string("lstm.b_") + gate, Tensor<T>::filled({hidden_size_}, value));
  }
}

template <typename T>
LstmState<T> Lstm<T>::zero_state() const {
  return {Tensor<T>::zeros({hidden_size_}), Tensor<T>::zeros({hidden_size_})};
}

template <typename T>
LstmState<T> Lstm<T>::step(const ParamView<T>& p, const Tensor<T>& z_f, const LstmState<T>& prev) const {
  if (z_f.rank() != 1 || z_f.dim(0) != input_dim_) {
    throw ShapeError("lstm: input " + to_string(z_f.shape()) + " but cell expects [" + std::to_string(input_dim_) + "]");
  }
  if (prev.h.shape() != Shape{hidden_size_} || prev.c.shape() != Shape{hidden_size_}) {
    throw ShapeError("lstm: state shapes " + to_string(prev.h.shape()) + "/" + to_string(prev.c.shape()) +
                     " do not match hidden size " + std::to_string(hidden_size_));
  }
  const auto x = concat<T>({z_f, prev.h}, 0);
  const auto i = sigmoid(linear(x, p("lstm.W_i"), p("lstm.b_i")));
  const auto f = sigmoid(linear(x, p("lstm.W_f"), p("lstm.b_f")));
  const auto o = sigmoid(linear(x, p("lstm.W_o"), p("lstm.b_o")));
  const auto g = tanh(linear(x, p("lstm.W_g"), p("lstm.b_g")));
  auto c = add(mul(f, prev.c), mul(i, g));
  auto h = mul(o, tanh(c));
  return {std::move(h), std::move(c)};
}

template class Lstm<float>;
template class Lstm<double>;

}  // namespace taillight
