#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "taillight/config.hpp"
#include "taillight/nn/params.hpp"

namespace taillight {

struct Probe {
  std::string param;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradcheckResult {
  std::string name;
  std::vector<Probe> probes;
  std::size_t resampled = 0;  // probes redrawn because the step crossed a ReLU kink
  double max_rel_error = 0;

  bool passed(double tolerance) const { return !probes.empty() && max_rel_error <= tolerance; }
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

using LossFn = std::function<Tensor<double>(const ParamView<double>&)>;

// Central differences on `probes` random scalars of `params` against one
// reverse-mode pass. Inputs under test go in `params` alongside weights.
GradcheckResult check_gradients(const std::string& name, const ParamStore<double>& params, const LossFn& loss,
                                const GradcheckConfig& config, std::uint64_t seed);

// One check per layer type (conv, dense, LSTM step, spatial attention,
// temporal attention with the output head, losses) plus the whole model.
std::vector<GradcheckResult> gradient_suite(const GradcheckConfig& config, const ModelConfig& model);

}  // namespace taillight
