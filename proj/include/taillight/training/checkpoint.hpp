#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "taillight/nn/params.hpp"

namespace taillight {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  int stage = 1;
  std::string config_text;  // Config::to_text() of the run
  ParamStore<T> params;
  std::map<std::string, Tensor<T>> momentum;
  std::string rng_state;
};

// Little-endian layout: magic "TLATTN01", u32 version, u32-prefixed config
// block (starting with a "stage = N" line), u32 tensor count, then per
// tensor u32 name length, name, u8 dtype (0 f32, 1 f64), u8 rank, u32 dims,
// raw values; momentum buffers are named "momentum/<param>". Then the
// u32-prefixed RNG state and a CRC32 of everything before it.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& checkpoint);

// Values stored in the other precision are converted on load.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

struct CheckpointInfo {
  int stage = 0;
  std::string config_text;
  Precision stored = Precision::kTrain;
};
CheckpointInfo peek_checkpoint(const std::filesystem::path& path);

}  // namespace taillight
