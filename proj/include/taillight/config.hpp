#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "taillight/model/taillight_net.hpp"
#include "taillight/preprocess/augment.hpp"
#include "taillight/preprocess/chunk.hpp"
#include "taillight/synth/dataset.hpp"
#include "taillight/training/train_config.hpp"

namespace taillight {

struct GradcheckConfig {
  std::size_t probes = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
};

// Everything one run needs. Text form is flat `key = value` lines with `#`
// comments; unknown keys and malformed values throw ConfigError.
struct Config {
  ModelConfig model;
  ChunkOptions chunk;
  bool augment = true;
  AugmentRanges augment_ranges;
  DatasetSpec data;
  TrainConfig train;
  GradcheckConfig gradcheck;

  Config();

  void set(const std::string& key, const std::string& value);
  // Cross-field checks; also copies the window into the scene parameters.
  void validate();
  std::string to_text() const;

  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);
};

}  // namespace taillight
