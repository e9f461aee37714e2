#pragma once

#include <functional>
#include <map>
#include <string>

#include "taillight/autodiff/tape.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

// Heavy-ball SGD: v <- momentum v + g; p <- p - lr v.
template <typename T>
class SgdMomentum {
 public:
  using Filter = std::function<bool(const std::string&)>;

  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}

  // Updates the parameters named in `grads` that pass `filter`.
  void step(ParamStore<T>& params, const GradMap<T>& grads, const Filter& filter = {});
  void reset() { velocity_.clear(); }

  const std::map<std::string, Tensor<T>>& velocity() const { return velocity_; }
  void set_velocity(std::map<std::string, Tensor<T>> v) { velocity_ = std::move(v); }

 private:
  double lr_;
  double momentum_;
  std::map<std::string, Tensor<T>> velocity_;
};

}  // namespace taillight
