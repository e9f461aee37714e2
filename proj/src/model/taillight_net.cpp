#include "taillight/model/taillight_net.hpp"

#include <string>

#include "taillight/autodiff/ops.hpp"

namespace taillight {

void ModelConfig::validate() const {
  backbone.validate();
  if (hidden_size == 0) throw ShapeError("hidden_size must be positive");
  if (attn_hidden == 0) throw ShapeError("attn_hidden must be positive");
}

AttentionSwitches AttentionSwitches::for_stage(int stage) {
  switch (stage) {
    case 1: return {false, false};
    case 2: return {false, true};
    case 3: return {true, true};
    default: throw ConfigError("training stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
}

bool AttentionSwitches::enables(ParamGroup group) const {
  if (group == ParamGroup::kSpatial) return spatial;
  if (group == ParamGroup::kTemporal) return temporal;
  return true;
}

template <typename T>
Tensor<T> ForwardResult<T>::last_logits() const {
  return select(logits, logits.dim(0) - 1);
}

template <typename T>
TaillightNet<T>::TaillightNet(ModelConfig config)
    : config_((config.validate(), std::move(config))),
      backbone_(config_.backbone),
      lstm_(config_.backbone.feature_dim, config_.hidden_size),
      spatial_(config_.backbone.split_channels(), config_.hidden_size, config_.attn_hidden),
      temporal_(config_.hidden_size),
      head_(config_.hidden_size, kNumClasses) {}

template <typename T>
void TaillightNet<T>::init_group(ParamStore<T>& store, ParamGroup group, std::mt19937_64& rng) const {
  switch (group) {
    case ParamGroup::kBackbone: backbone_.init(store, rng); break;
    case ParamGroup::kLstm: lstm_.init(store, rng); break;
    case ParamGroup::kSpatial: spatial_.init(store, rng); break;
    case ParamGroup::kTemporal: temporal_.init(store, rng); break;
    case ParamGroup::kHead: head_.init(store, rng); break;
  }
}

template <typename T>
ParamStore<T> TaillightNet<T>::init(std::uint64_t seed) const {
  ParamStore<T> store;
  std::mt19937_64 rng(seed);
  for (auto group : all_groups()) init_group(store, group, rng);
  return store;
}

template <typename T>
ForwardResult<T> TaillightNet<T>::forward(const ParamView<T>& p, const Tensor<T>& frames,
                                          AttentionSwitches switches) const {
  if (frames.rank() != 4) throw ShapeError("forward expects [T,C,H,W] frames, got " + to_string(frames.shape()));
  const std::size_t steps = frames.dim(0);
  const std::size_t grid = config_.backbone.split_grid();

  // The head does not depend on the recurrence, so all steps go through it
  // as one batch.
  const auto features = backbone_.head(p, frames);
  const auto uniform = SpatialAttention<T>::uniform(grid, grid);

  ForwardResult<T> result;
  result.alpha.reserve(steps);
  std::vector<Tensor<T>> hs;
  std::vector<Tensor<T>> cs;
  auto state = lstm_.zero_state();
  for (std::size_t t = 0; t < steps; ++t) {
    const auto z_l = select(features, t);
    Tensor<T> alpha = switches.spatial ? SpatialAttention<T>::weights(spatial_.scores(p, z_l, state.h)) : uniform;
    const auto z_f = backbone_.tail(p, SpatialAttention<T>::apply(z_l, alpha));
    state = lstm_.step(p, z_f, state);
    result.alpha.push_back(std::move(alpha));
    hs.push_back(state.h);
    cs.push_back(state.c);
  }
  result.hidden = stack(hs);
  result.cells = stack(cs);

  Tensor<T> mixed;
  if (switches.temporal) {
    const auto summaries = temporal_.summaries(p, result.hidden, result.cells);
    result.beta = TemporalAttention<T>::weights(summaries, result.hidden);
    mixed = TemporalAttention<T>::mix(result.beta, result.hidden);
  } else {
    result.beta = TemporalAttention<T>::identity(steps);
    mixed = result.hidden;
  }
  result.logits = head_.predict(p, mixed, result.cells);
  return result;
}

template struct ForwardResult<float>;
template struct ForwardResult<double>;
template class TaillightNet<float>;
template class TaillightNet<double>;

}  // namespace taillight
