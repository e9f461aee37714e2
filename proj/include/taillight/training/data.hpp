#pragma once

#include <cstddef>
#include <vector>

#include "taillight/config.hpp"
#include "taillight/preprocess/augment.hpp"
#include "taillight/synth/dataset.hpp"

namespace taillight {

struct ChunkRef {
  std::size_t sequence = 0;
  std::size_t start = 0;
};

// Sequences resized to the network input and indexed by chunk. Chunks are
// materialised on demand, so a split costs its frames and nothing more.
class ChunkSource {
 public:
  ChunkSource(std::vector<FrameSequence> sequences, ChunkOptions options, std::size_t input_side);

  std::size_t size() const { return refs_.size(); }
  const ChunkRef& ref(std::size_t i) const { return refs_.at(i); }
  const FrameSequence& sequence_of(std::size_t i) const { return sequences_[ref(i).sequence]; }
  const std::vector<FrameSequence>& sequences() const { return sequences_; }
  TaillightState label(std::size_t i) const { return sequence_of(i).label; }
  const ChunkOptions& options() const { return options_; }

  Chunk chunk(std::size_t i) const;
  // Jitter applied to the raw frames before differencing; flips swap L and R.
  Chunk augmented(std::size_t i, const AugmentParams& params) const;

 private:
  std::vector<FrameSequence> sequences_;
  ChunkOptions options_;
  std::vector<ChunkRef> refs_;
};

ChunkSource load_chunks(const DatasetReader& reader, Split split, const Config& config);

}  // namespace taillight
