#include "taillight/preprocess/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace taillight {

bool AugmentParams::is_identity() const {
  return brightness == 1.0 && contrast == 1.0 && gains == std::array<double, 3>{1, 1, 1} && !flip;
}

AugmentParams sample_augment(const AugmentRanges& ranges, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AugmentParams p;
  p.brightness = 1.0 + ranges.brightness * u(rng);
  p.contrast = 1.0 + ranges.contrast * u(rng);
  for (auto& g : p.gains) g = 1.0 + ranges.color * u(rng);
  p.flip = coin(rng) < ranges.flip_prob;
  return p;
}

std::vector<Image> apply_augment(std::span<const Image> frames, const AugmentParams& params) {
  if (params.is_identity()) return {frames.begin(), frames.end()};
  // contrast pivots on the chunk-wide mean after brightness
  double sum = 0;
  std::size_t count = 0;
  for (const auto& f : frames) {
    for (auto v : f.pixels) sum += v;
    count += f.pixels.size();
  }
  const double mu = count ? params.brightness * sum / static_cast<double>(count) : 0.0;
  std::vector<Image> raw;
  raw.reserve(frames.size());
  for (const auto& f : frames) {
    Image out = params.flip ? flip_horizontal(f) : f;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      const double g = params.gains[i % out.channels % 3];
      const double v = ((out.pixels[i] * params.brightness - mu) * params.contrast + mu) * g;
      out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    raw.push_back(std::move(out));
  }
  return raw;
}

std::pair<Chunk, TaillightState> augment(const Chunk& chunk, TaillightState label, const AugmentParams& params,
                                         const ChunkOptions& options) {
  if (params.is_identity()) return {chunk, label};
  auto raw = apply_augment(chunk.raw, params);
  const TaillightState new_label = params.flip ? label.flipped() : label;
  return {build_chunk(std::move(raw), new_label, chunk.origin, options), new_label};
}

std::pair<Chunk, TaillightState> augment(const Chunk& chunk, TaillightState label, std::uint64_t seed,
                                         const AugmentRanges& ranges, const ChunkOptions& options) {
  return augment(chunk, label, sample_augment(ranges, seed), options);
}

}  // namespace taillight
