#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "taillight/preprocess/chunk.hpp"

namespace taillight {

// One draw of photometric and geometric jitter, shared by every frame of a
// chunk so that it cannot look like blinking.
struct AugmentParams {
  double brightness = 1.0;               // multiplies every value
  double contrast = 1.0;                 // stretch about the chunk mean
  std::array<double, 3> gains{1, 1, 1};  // per-channel colour balance
  bool flip = false;                     // horizontal mirror, swaps L and R

  bool is_identity() const;
};

struct AugmentRanges {
  double brightness = 0.2;  // scale drawn from [1-b, 1+b]
  double contrast = 0.2;
  double color = 0.1;
  double flip_prob = 0.5;
};

AugmentParams sample_augment(const AugmentRanges& ranges, std::uint64_t seed);

// Photometric jitter and flip on raw frames only.
std::vector<Image> apply_augment(std::span<const Image> raw, const AugmentParams& params);

// Applied to the raw frames; the differences are recomputed afterwards.
std::pair<Chunk, TaillightState> augment(const Chunk& chunk, TaillightState label, const AugmentParams& params,
                                         const ChunkOptions& options);
std::pair<Chunk, TaillightState> augment(const Chunk& chunk, TaillightState label, std::uint64_t seed,
                                         const AugmentRanges& ranges, const ChunkOptions& options);

}  // namespace taillight
