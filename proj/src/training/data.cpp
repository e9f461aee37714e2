#include "taillight/training/data.hpp"

namespace taillight {

ChunkSource::ChunkSource(std::vector<FrameSequence> sequences, ChunkOptions options, std::size_t input_side)
    : sequences_(std::move(sequences)), options_(options) {
  for (std::size_t s = 0; s < sequences_.size(); ++s) {
    auto& seq = sequences_[s];
    for (auto& f : seq.frames)
      if (f.width != input_side || f.height != input_side) f = resize_bilinear(f, input_side, input_side);
    const auto starts = chunk_starts(seq.frames.size(), options_.window, options_.stride);
    if (starts.empty()) make_chunks(seq, options_);  // logs the short-sequence warning
    for (auto st : starts) refs_.push_back({s, st});
  }
}

Chunk ChunkSource::chunk(std::size_t i) const { return chunk_at(sequence_of(i), ref(i).start, options_); }

Chunk ChunkSource::augmented(std::size_t i, const AugmentParams& params) const {
  const auto& seq = sequence_of(i);
  const auto start = static_cast<long>(ref(i).start);
  std::span<const Image> raw(seq.frames.begin() + start, seq.frames.begin() + start + static_cast<long>(options_.window));
  const TaillightState label = params.flip ? seq.label.flipped() : seq.label;
  return build_chunk(apply_augment(raw, params), label, {seq.source_id, ref(i).start}, options_);
}

ChunkSource load_chunks(const DatasetReader& reader, Split split, const Config& config) {
  return ChunkSource(reader.load_split(split), config.chunk, config.model.backbone.input_side);
}

}  // namespace taillight
