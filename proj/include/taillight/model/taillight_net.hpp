#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "taillight/attention/spatial.hpp"
#include "taillight/attention/temporal.hpp"
#include "taillight/nn/backbone.hpp"
#include "taillight/nn/lstm.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

inline constexpr std::size_t kNumClasses = 8;

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t hidden_size = 256;
  std::size_t attn_hidden = 64;

  void validate() const;
};

// Which attention mechanisms are live. A bypassed spatial attention uses a
// uniform map; a bypassed temporal attention uses beta = I, so p_t reads h_t.
struct AttentionSwitches {
  bool spatial = true;
  bool temporal = true;

  static AttentionSwitches for_stage(int stage);
  bool enables(ParamGroup group) const;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;              // [T, 8], row t is p_t
  std::vector<Tensor<T>> alpha;  // T maps of [H_l, W_l]
  Tensor<T> beta;                // [T, T]
  Tensor<T> hidden;              // [T, hidden]
  Tensor<T> cells;               // [T, hidden]

  Tensor<T> last_logits() const;
};

// CNN head -> spatial attention -> CNN tail -> LSTM -> temporal attention ->
// output head, over one chunk of network inputs.
template <typename T>
class TaillightNet {
 public:
  explicit TaillightNet(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const Backbone<T>& backbone() const { return backbone_; }
  const Lstm<T>& lstm() const { return lstm_; }
  const SpatialAttention<T>& spatial() const { return spatial_; }
  const TemporalAttention<T>& temporal() const { return temporal_; }
  const OutputHead<T>& head() const { return head_; }

  // Every group, drawn from one engine seeded with `seed`.
  ParamStore<T> init(std::uint64_t seed) const;
  void init_group(ParamStore<T>& store, ParamGroup group, std::mt19937_64& rng) const;

  // frames [T, C, H, W]; the first is the raw frame, the rest differences.
  ForwardResult<T> forward(const ParamView<T>& p, const Tensor<T>& frames, AttentionSwitches switches) const;

 private:
  ModelConfig config_;
  Backbone<T> backbone_;
  Lstm<T> lstm_;
  SpatialAttention<T> spatial_;
  TemporalAttention<T> temporal_;
  OutputHead<T> head_;
};

}  // namespace taillight
