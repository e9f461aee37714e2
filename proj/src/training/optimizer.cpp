#include "taillight/training/optimizer.hpp"

#include "taillight/error.hpp"

namespace taillight {

template <typename T>
void SgdMomentum<T>::step(ParamStore<T>& params, const GradMap<T>& grads, const Filter& filter) {
  for (const auto& [name, g] : grads) {
    if (filter && !filter(name)) continue;
    const Tensor<T>& p = params.get(name);
    if (g.shape() != p.shape()) throw ShapeError("gradient shape mismatch for " + name);
    std::vector<T> v(p.size(), T(0));
    if (auto it = velocity_.find(name); it != velocity_.end()) {
      auto old = it->second.values();
      std::copy(old.begin(), old.end(), v.begin());
    }
    std::vector<T> next(p.values().begin(), p.values().end());
    const T mu = static_cast<T>(momentum_), lr = static_cast<T>(lr_);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = mu * v[i] + g[i];
      next[i] -= lr * v[i];
    }
    velocity_[name] = Tensor<T>(p.shape(), std::move(v));
    params.set(name, Tensor<T>(p.shape(), std::move(next)));
  }
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace taillight
