#include "taillight/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace taillight {

const char* group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::kBackbone: return "backbone";
    case ParamGroup::kLstm: return "lstm";
    case ParamGroup::kSpatial: return "spatial";
    case ParamGroup::kTemporal: return "temporal";
    case ParamGroup::kHead: return "head";
  }
  return "?";
}

ParamGroup group_of(const std::string& param_name) {
  for (auto g : all_groups()) {
    const std::string prefix = std::string(group_name(g)) + ".";
    if (param_name.rfind(prefix, 0) == 0) return g;
  }
  throw std::invalid_argument("parameter '" + param_name + "' belongs to no known group");
}

const std::vector<ParamGroup>& all_groups() {
  static const std::vector<ParamGroup> groups{ParamGroup::kBackbone, ParamGroup::kLstm, ParamGroup::kSpatial,
                                              ParamGroup::kTemporal, ParamGroup::kHead};
  return groups;
}

template <typename T>
void ParamStore<T>::set(const std::string& name, Tensor<T> value) {
  params_.insert_or_assign(name, value.detach());
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, T bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> values(numel(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng) * static_cast<double>(bound));
  return Tensor<T>(std::move(shape), std::move(values));
}

template <typename T>
Tensor<T> conv_weight(std::size_t out, std::size_t in, std::size_t kernel, std::mt19937_64& rng) {
  const auto fan_in = static_cast<double>(in * kernel * kernel);
  return uniform_tensor<T>({out, in, kernel, kernel}, static_cast<T>(std::sqrt(6.0 / fan_in)), rng);
}

template <typename T>
Tensor<T> dense_weight(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  return uniform_tensor<T>({out, in}, static_cast<T>(std::sqrt(3.0 / static_cast<double>(in))), rng);
}

template class ParamStore<float>;
template class ParamStore<double>;
template Tensor<float> uniform_tensor(Shape, float, std::mt19937_64&);
template Tensor<double> uniform_tensor(Shape, double, std::mt19937_64&);
template Tensor<float> conv_weight(std::size_t, std::size_t, std::size_t, std::mt19937_64&);
template Tensor<double> conv_weight(std::size_t, std::size_t, std::size_t, std::mt19937_64&);
template Tensor<float> dense_weight(std::size_t, std::size_t, std::mt19937_64&);
template Tensor<double> dense_weight(std::size_t, std::size_t, std::mt19937_64&);

}  // namespace taillight
