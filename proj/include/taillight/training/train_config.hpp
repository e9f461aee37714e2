#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "taillight/autodiff/tensor.hpp"

namespace taillight {

// kTopK averages the hardest fraction of the batch. The two label modes blend
// the target with the model's own (detached) prediction instead.
enum class LossMode { kTopK, kSoftBootstrap, kHardBootstrap };

const char* loss_mode_name(LossMode mode);
LossMode parse_loss_mode(const std::string& name);

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::array<std::size_t, 3> epochs{15, 10, 10};
  double bootstrap_ratio = 0.3;
  LossMode loss_mode = LossMode::kTopK;
  std::uint64_t seed = 1;
  Precision precision = Precision::kTrain;
  bool check_finite = false;
  bool eval_each_epoch = true;

  void validate() const;
};

}  // namespace taillight
