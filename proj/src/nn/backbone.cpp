#include "taillight/nn/backbone.hpp"

#include <string>

#include "taillight/autodiff/ops.hpp"

namespace taillight {

std::size_t BackboneConfig::grid_side(std::size_t stage) const {
  std::size_t side = input_side;
  for (std::size_t i = 0; i <= stage; ++i) side = (side + 1) / 2;
  return side;
}

std::vector<std::size_t> BackboneConfig::valid_splits() const {
  std::vector<std::size_t> splits;
  for (std::size_t l = 1; l <= num_stages(); ++l) {
    if (grid_side(l) >= 2) splits.push_back(l);
  }
  return splits;
}

void BackboneConfig::validate() const {
  if (in_channels == 0 || feature_dim == 0) throw ShapeError("backbone: channel counts must be positive");
  if (stage_channels.empty()) throw ShapeError("backbone: at least one stage is required");
  for (auto c : stage_channels) {
    if (c == 0) throw ShapeError("backbone: stage channel counts must be positive");
  }
  if (split_l < 1 || split_l > num_stages()) {
    throw ShapeError("backbone: split_l=" + std::to_string(split_l) + " must lie in [1, " +
                     std::to_string(num_stages()) + "]");
  }
  if (grid_side(split_l) < 2) {
    throw ShapeError("backbone: input_side " + std::to_string(input_side) + " leaves a " +
                     std::to_string(grid_side(split_l)) + "x" + std::to_string(grid_side(split_l)) +
                     " grid at split_l=" + std::to_string(split_l) + " (need >= 2)");
  }
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  return add(x, reshape(bias, Shape{bias.size(), 1, 1}));
}

template <typename T>
Backbone<T>::Backbone(BackboneConfig config) : config_(std::move(config)) {
  config_.validate();
}

template <typename T>
void Backbone<T>::init(ParamStore<T>& store, std::mt19937_64& rng) const {
  const auto& ch = config_.stage_channels;
  // The attention map sums to one, so a uniform map divides z_l by the cell
  // count. The first layer after the split starts with that gain undone.
  const auto cells = static_cast<double>(config_.split_grid() * config_.split_grid());
  auto gained = [cells](Tensor<T> w) {
    std::vector<T> v(w.values().begin(), w.values().end());
    for (auto& x : v) x = static_cast<T>(x * cells);
    return Tensor<T>(w.shape(), std::move(v));
  };
  store.set("backbone.stem.w", conv_weight<T>(ch[0], config_.in_channels, 3, rng));
  store.set("backbone.stem.b", Tensor<T>::zeros({ch[0]}));
  for (std::size_t s = 1; s <= config_.num_stages(); ++s) {
    const std::size_t in = s == 1 ? ch[0] : ch[s - 2];
    const std::size_t out = ch[s - 1];
    const std::string prefix = "backbone.stage" + std::to_string(s) + ".";
    const bool entry = s == config_.split_l + 1;
    auto conv1 = conv_weight<T>(out, in, 3, rng);
    store.set(prefix + "conv1.w", entry ? gained(conv1) : conv1);
    store.set(prefix + "conv1.b", Tensor<T>::zeros({out}));
    store.set(prefix + "conv2.w", conv_weight<T>(out, out, 3, rng));
    store.set(prefix + "conv2.b", Tensor<T>::zeros({out}));
    auto proj = conv_weight<T>(out, in, 1, rng);
    store.set(prefix + "proj.w", entry ? gained(proj) : proj);
    store.set(prefix + "proj.b", Tensor<T>::zeros({out}));
  }
  auto fc = dense_weight<T>(config_.feature_dim, ch.back(), rng);
  store.set("backbone.fc.w", config_.split_l == config_.num_stages() ? gained(fc) : fc);
  store.set("backbone.fc.b", Tensor<T>::zeros({config_.feature_dim}));
}

template <typename T>
Tensor<T> Backbone<T>::stem(const ParamView<T>& p, const Tensor<T>& x) const {
  return relu(add_channel_bias(conv2d(x, p("backbone.stem.w"), 2, 1), p("backbone.stem.b")));
}

template <typename T>
Tensor<T> Backbone<T>::stage(const ParamView<T>& p, const Tensor<T>& x, std::size_t index) const {
  const std::string prefix = "backbone.stage" + std::to_string(index) + ".";
  auto y = relu(add_channel_bias(conv2d(x, p(prefix + "conv1.w"), 2, 1), p(prefix + "conv1.b")));
  y = add_channel_bias(conv2d(y, p(prefix + "conv2.w"), 1, 1), p(prefix + "conv2.b"));
  auto skip = add_channel_bias(conv2d(x, p(prefix + "proj.w"), 2, 0), p(prefix + "proj.b"));
  return relu(add(y, skip));
}

template <typename T>
Tensor<T> Backbone<T>::stages(const ParamView<T>& p, const Tensor<T>& x, std::size_t first,
                              std::size_t last) const {
  Tensor<T> y = x;
  for (std::size_t s = first; s <= last; ++s) y = s == 0 ? stem(p, y) : stage(p, y, s);
  return y;
}

template <typename T>
Tensor<T> Backbone<T>::pool_and_project(const ParamView<T>& p, const Tensor<T>& x) const {
  const bool batched = x.rank() == 4;
  auto pooled = batched ? mean(x, {2, 3}) : mean(x, {1, 2});
  return linear(pooled, p("backbone.fc.w"), p("backbone.fc.b"));
}

template <typename T>
Tensor<T> Backbone<T>::head(const ParamView<T>& p, const Tensor<T>& x) const {
  const std::size_t offset = x.rank() == 4 ? 1 : 0;
  if ((x.rank() != 3 && x.rank() != 4) || x.dim(offset) != config_.in_channels ||
      x.dim(offset + 1) != config_.input_side || x.dim(offset + 2) != config_.input_side) {
    throw ShapeError("backbone head expects [" + std::to_string(config_.in_channels) + "," +
                     std::to_string(config_.input_side) + "," + std::to_string(config_.input_side) +
                     "] frames, got " + to_string(x.shape()));
  }
  return stages(p, x, 0, config_.split_l);
}

template <typename T>
Tensor<T> Backbone<T>::tail(const ParamView<T>& p, const Tensor<T>& z) const {
  const std::size_t offset = z.rank() == 4 ? 1 : 0;
  const std::size_t grid = config_.split_grid();
  if ((z.rank() != 3 && z.rank() != 4) || z.dim(offset) != config_.split_channels() ||
      z.dim(offset + 1) != grid || z.dim(offset + 2) != grid) {
    throw ShapeError("backbone tail expects [" + std::to_string(config_.split_channels()) + "," +
                     std::to_string(grid) + "," + std::to_string(grid) + "] features, got " + to_string(z.shape()));
  }
  return pool_and_project(p, stages(p, z, config_.split_l + 1, config_.num_stages()));
}

template class Backbone<float>;
template class Backbone<double>;
template Tensor<float> add_channel_bias(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> add_channel_bias(const Tensor<double>&, const Tensor<double>&);

}  // namespace taillight
