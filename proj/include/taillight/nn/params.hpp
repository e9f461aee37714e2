#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "taillight/autodiff/tape.hpp"
#include "taillight/autodiff/tensor.hpp"

namespace taillight {

// Weight groups switched on and off by the progressive schedule.
enum class ParamGroup : std::uint8_t { kBackbone, kLstm, kSpatial, kTemporal, kHead };

const char* group_name(ParamGroup group);
// Group from the name prefix ("backbone.", "lstm.", ...).
ParamGroup group_of(const std::string& param_name);
const std::vector<ParamGroup>& all_groups();

template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  void set(const std::string& name, Tensor<T> value);
  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }
  const Map& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

 private:
  Map params_;
};

// Parameter lookup for one forward pass. With a tape every parameter is a
// watched leaf; without one the pass builds no graph.
template <typename T>
class ParamView {
 public:
  explicit ParamView(const ParamStore<T>& store, Tape<T>* tape = nullptr) : store_(store), tape_(tape) {}

  Tensor<T> operator()(const std::string& name) const {
    return tape_ ? tape_->watch(name, store_.get(name)) : store_.get(name);
  }
  Tape<T>* tape() const { return tape_; }

 private:
  const ParamStore<T>& store_;
  Tape<T>* tape_;
};

// U(-bound, bound) weights, drawn in call order from one engine.
template <typename T>
Tensor<T> uniform_tensor(Shape shape, T bound, std::mt19937_64& rng);

// fan-in scaled initial values: sqrt(6/fan_in) for ReLU convolutions,
// sqrt(3/fan_in) (unit gain) for dense layers.
template <typename T>
Tensor<T> conv_weight(std::size_t out, std::size_t in, std::size_t kernel, std::mt19937_64& rng);
template <typename T>
Tensor<T> dense_weight(std::size_t out, std::size_t in, std::mt19937_64& rng);

}  // namespace taillight
