#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "taillight/autodiff/tensor.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

// Residual CNN: a stride-2 3x3 stem followed by residual stages, each halving
// the resolution. Stage split_l's output feeds spatial attention; stages
// after it, global average pooling and a dense layer form the tail.
struct BackboneConfig {
  std::size_t input_side = 96;
  std::size_t in_channels = 3;
  std::vector<std::size_t> stage_channels{16, 32, 64, 128};
  std::size_t split_l = 4;
  std::size_t feature_dim = 128;

  std::size_t num_stages() const { return stage_channels.size(); }
  // Side of the feature map after `stage` halvings past the stem (0 = stem).
  std::size_t grid_side(std::size_t stage) const;
  std::size_t split_channels() const { return stage_channels.at(split_l - 1); }
  std::size_t split_grid() const { return grid_side(split_l); }
  // Every split_l the geometry admits.
  std::vector<std::size_t> valid_splits() const;
  // Throws ShapeError naming the violated constraint.
  void validate() const;
};

template <typename T>
class Backbone {
 public:
  explicit Backbone(BackboneConfig config);

  const BackboneConfig& config() const { return config_; }
  void init(ParamStore<T>& store, std::mt19937_64& rng) const;

  // x [C,H,W] or [N,C,H,W] -> z_l [d,H_l,W_l] (or batched).
  Tensor<T> head(const ParamView<T>& p, const Tensor<T>& x) const;
  // weighted z_l -> z_f [feature_dim] (or [N,feature_dim]).
  Tensor<T> tail(const ParamView<T>& p, const Tensor<T>& z) const;
  // Runs the stages from `first` to `last` inclusive (1-based; 0 = stem).
  Tensor<T> stages(const ParamView<T>& p, const Tensor<T>& x, std::size_t first, std::size_t last) const;

 private:
  Tensor<T> stem(const ParamView<T>& p, const Tensor<T>& x) const;
  Tensor<T> stage(const ParamView<T>& p, const Tensor<T>& x, std::size_t index) const;
  Tensor<T> pool_and_project(const ParamView<T>& p, const Tensor<T>& x) const;

  BackboneConfig config_;
};

// Adds a per-channel bias to [C,H,W] or [N,C,H,W].
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias);

}  // namespace taillight
