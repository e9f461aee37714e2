#include "taillight/attention/temporal.hpp"

#include <string>

#include "taillight/autodiff/ops.hpp"

namespace taillight {
namespace {

void require_rows(const Shape& shape, std::size_t cols, const char* what) {
  if (shape.size() != 2 || shape[1] != cols) {
    throw ShapeError(std::string(what) + " must be [T," + std::to_string(cols) + "], got " + to_string(shape));
  }
}

}  // namespace

template <typename T>
TemporalAttention<T>::TemporalAttention(std::size_t hidden_size) : hidden_size_(hidden_size) {
  if (hidden_size == 0) throw ShapeError("temporal attention: hidden size must be positive");
}

template <typename T>
void TemporalAttention<T>::init(ParamStore<T>& store, std::mt19937_64& rng) const {
  store.set("temporal.W_d_h", dense_weight<T>(hidden_size_, hidden_size_, rng));
  store.set("temporal.W_d_c", dense_weight<T>(hidden_size_, hidden_size_, rng));
  store.set("temporal.b_d_hc", Tensor<T>::zeros({hidden_size_}));
}

template <typename T>
Tensor<T> TemporalAttention<T>::summaries(const ParamView<T>& p, const Tensor<T>& hidden,
                                          const Tensor<T>& cells) const {
  require_rows(hidden.shape(), hidden_size_, "hidden states");
  require_rows(cells.shape(), hidden_size_, "memory cells");
  if (hidden.dim(0) != cells.dim(0)) throw ShapeError("hidden states and memory cells differ in length");
  return add(linear(hidden, p("temporal.W_d_h"), p("temporal.b_d_hc")),
             matmul(tanh(cells), p("temporal.W_d_c"), false, true));
}

template <typename T>
Tensor<T> TemporalAttention<T>::weights(const Tensor<T>& summaries, const Tensor<T>& hidden) {
  if (summaries.rank() != 2 || summaries.shape() != hidden.shape()) {
    throw ShapeError("temporal weights: summaries " + to_string(summaries.shape()) + " vs hidden " +
                     to_string(hidden.shape()));
  }
  return softmax(matmul(summaries, hidden, false, true), 1);
}

template <typename T>
Tensor<T> TemporalAttention<T>::mix(const Tensor<T>& beta, const Tensor<T>& hidden) {
  if (beta.rank() != 2 || hidden.rank() != 2 || beta.dim(1) != hidden.dim(0)) {
    throw ShapeError("mix_hidden: beta " + to_string(beta.shape()) + " vs hidden " + to_string(hidden.shape()));
  }
  return matmul(beta, hidden);
}

template <typename T>
Tensor<T> TemporalAttention<T>::identity(std::size_t steps) {
  std::vector<T> values(steps * steps, T(0));
  for (std::size_t t = 0; t < steps; ++t) values[t * steps + t] = T(1);
  return Tensor<T>({steps, steps}, std::move(values));
}

template <typename T>
OutputHead<T>::OutputHead(std::size_t hidden_size, std::size_t num_classes)
    : hidden_size_(hidden_size), num_classes_(num_classes) {
  if (hidden_size == 0 || num_classes == 0) throw ShapeError("output head: dimensions must be positive");
}

template <typename T>
void OutputHead<T>::init(ParamStore<T>& store, std::mt19937_64& rng) const {
  store.set("head.W_p_h", dense_weight<T>(hidden_size_, hidden_size_, rng));
  store.set("head.W_p_c", dense_weight<T>(hidden_size_, hidden_size_, rng));
  store.set("head.b_p_hc", Tensor<T>::zeros({hidden_size_}));
  store.set("head.W_p", dense_weight<T>(num_classes_, hidden_size_, rng));
  store.set("head.b_p", Tensor<T>::zeros({num_classes_}));
}

template <typename T>
Tensor<T> OutputHead<T>::predict(const ParamView<T>& p, const Tensor<T>& mixed_hidden, const Tensor<T>& cells) const {
  require_rows(mixed_hidden.shape(), hidden_size_, "mixed hidden states");
  require_rows(cells.shape(), hidden_size_, "memory cells");
  const auto inner = add(linear(mixed_hidden, p("head.W_p_h"), p("head.b_p_hc")),
                         matmul(cells, p("head.W_p_c"), false, true));
  return linear(tanh(inner), p("head.W_p"), p("head.b_p"));
}

template <typename T>
std::size_t argmax_class(std::span<const T> logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

template class TemporalAttention<float>;
template class TemporalAttention<double>;
template class OutputHead<float>;
template class OutputHead<double>;
template std::size_t argmax_class(std::span<const float>);
template std::size_t argmax_class(std::span<const double>);

}  // namespace taillight
