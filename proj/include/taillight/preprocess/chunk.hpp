#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taillight/autodiff/tensor.hpp"
#include "taillight/preprocess/image.hpp"
#include "taillight/preprocess/state.hpp"

namespace taillight {

struct FrameSequence {
  std::vector<Image> frames;
  std::string source_id;
  TaillightState label;
};

// Frame alignment before differencing. kGlobalShift searches integer
// translations; kIdentity compares frames as they are.
enum class AlignMode { kIdentity, kGlobalShift };

const char* align_mode_name(AlignMode mode);
AlignMode parse_align_mode(const std::string& name);

struct Shift {
  int dx = 0;
  int dy = 0;
  bool operator==(const Shift&) const = default;
};

// Content moved by `shift`: out(x, y) = src(x - dx, y - dy), edges replicated.
Image warp_shift(const Image& src, Shift shift);

// Integer translation of `prev` within +-max_shift that minimises the mean
// absolute difference to `cur` over the overlap. Ties prefer the smaller
// |dx|+|dy|, then scan order.
Shift estimate_shift(const Image& prev, const Image& cur, int max_shift);

// diff[t-1] = |warp(frames[t-1]) - frames[t]| for t = 1..N-1.
std::vector<Image> align_and_diff(std::span<const Image> frames, AlignMode mode, int max_shift,
                                  std::vector<Shift>* shifts = nullptr);

struct ChunkOptions {
  std::size_t window = 16;
  std::size_t stride = 4;
  AlignMode align = AlignMode::kGlobalShift;
  int max_shift = 4;
};

struct ChunkOrigin {
  std::string source_id;
  std::size_t start = 0;
};

// `window` raw frames and the network input built from them: the first raw
// frame followed by window-1 difference images.
struct Chunk {
  std::vector<Image> raw;
  std::vector<Image> net_input;
  TaillightState label;
  ChunkOrigin origin;
};

// floor((n - window) / stride) + 1 when n >= window, else 0.
std::size_t chunk_count(std::size_t frames, std::size_t window, std::size_t stride);
std::vector<std::size_t> chunk_starts(std::size_t frames, std::size_t window, std::size_t stride);

// Rebuilds net_input from raw.
Chunk build_chunk(std::vector<Image> raw, TaillightState label, ChunkOrigin origin, const ChunkOptions& options);
Chunk chunk_at(const FrameSequence& seq, std::size_t start, const ChunkOptions& options);
// Short sequences yield no chunks and a logged warning.
std::vector<Chunk> make_chunks(const FrameSequence& seq, const ChunkOptions& options);

// [window, C, H, W], bytes scaled to [0, 1].
template <typename T>
Tensor<T> chunk_tensor(const Chunk& chunk);

}  // namespace taillight
