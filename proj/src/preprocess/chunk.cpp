#include "taillight/preprocess/chunk.hpp"

#include <algorithm>
#include <cstdlib>

#include "taillight/error.hpp"
#include "taillight/log.hpp"

namespace taillight {

const char* align_mode_name(AlignMode mode) {
  return mode == AlignMode::kIdentity ? "identity" : "global_shift";
}

AlignMode parse_align_mode(const std::string& name) {
  if (name == "identity" || name == "none") return AlignMode::kIdentity;
  if (name == "global_shift" || name == "shift") return AlignMode::kGlobalShift;
  throw ConfigError("unknown align mode '" + name + "'");
}

Image warp_shift(const Image& src, Shift shift) {
  Image dst(src.width, src.height, src.channels);
  const long w = static_cast<long>(src.width), h = static_cast<long>(src.height);
  for (long y = 0; y < h; ++y) {
    const long sy = std::clamp(y - shift.dy, 0L, h - 1);
    for (long x = 0; x < w; ++x) {
      const long sx = std::clamp(x - shift.dx, 0L, w - 1);
      const std::uint8_t* s = &src.pixels[(sy * w + sx) * src.channels];
      std::uint8_t* d = &dst.pixels[(y * w + x) * src.channels];
      std::copy(s, s + src.channels, d);
    }
  }
  return dst;
}

Shift estimate_shift(const Image& prev, const Image& cur, int max_shift) {
  if (!prev.same_geometry(cur)) throw ShapeError("estimate_shift: frames differ in size");
  if (max_shift < 0) throw ConfigError("max_shift must be >= 0");
  const long w = static_cast<long>(prev.width), h = static_cast<long>(prev.height);
  const long c = static_cast<long>(prev.channels);
  Shift best{};
  std::uint64_t best_sum = 0, best_count = 0;
  int best_l1 = 0;
  bool have = false;
  for (int dy = -max_shift; dy <= max_shift; ++dy) {
    for (int dx = -max_shift; dx <= max_shift; ++dx) {
      // cur(x, y) against prev(x - dx, y - dy) where both exist
      const long x0 = std::max(0L, static_cast<long>(dx)), x1 = std::min(w, w + dx);
      const long y0 = std::max(0L, static_cast<long>(dy)), y1 = std::min(h, h + dy);
      if (x1 <= x0 || y1 <= y0) continue;
      std::uint64_t sum = 0;
      for (long y = y0; y < y1; ++y) {
        const std::uint8_t* a = &cur.pixels[(y * w + x0) * c];
        const std::uint8_t* b = &prev.pixels[((y - dy) * w + (x0 - dx)) * c];
        const long n = (x1 - x0) * c;
        for (long i = 0; i < n; ++i) sum += static_cast<std::uint64_t>(std::abs(int(a[i]) - int(b[i])));
      }
      const std::uint64_t count = static_cast<std::uint64_t>((x1 - x0) * (y1 - y0) * c);
      const int l1 = std::abs(dx) + std::abs(dy);
      bool better = !have;
      if (have) {
        // compare sum/count exactly
        const auto lhs = static_cast<unsigned __int128>(sum) * best_count;
        const auto rhs = static_cast<unsigned __int128>(best_sum) * count;
        better = lhs < rhs || (lhs == rhs && l1 < best_l1);
      }
      if (better) {
        best = {dx, dy};
        best_sum = sum;
        best_count = count;
        best_l1 = l1;
        have = true;
      }
    }
  }
  return best;
}

namespace {

Image abs_diff(const Image& a, const Image& b) {
  Image d(a.width, a.height, a.channels);
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    d.pixels[i] = static_cast<std::uint8_t>(std::abs(int(a.pixels[i]) - int(b.pixels[i])));
  return d;
}

}  // namespace

std::vector<Image> align_and_diff(std::span<const Image> frames, AlignMode mode, int max_shift,
                                  std::vector<Shift>* shifts) {
  if (frames.size() < 2) throw DataError("differencing needs at least two frames");
  for (const auto& f : frames)
    if (!f.same_geometry(frames[0])) throw ShapeError("frames in a sequence must share geometry");
  std::vector<Image> out;
  out.reserve(frames.size() - 1);
  if (shifts) shifts->clear();
  for (std::size_t t = 1; t < frames.size(); ++t) {
    Shift s{};
    if (mode == AlignMode::kGlobalShift) s = estimate_shift(frames[t - 1], frames[t], max_shift);
    if (shifts) shifts->push_back(s);
    if (s == Shift{})
      out.push_back(abs_diff(frames[t - 1], frames[t]));
    else
      out.push_back(abs_diff(warp_shift(frames[t - 1], s), frames[t]));
  }
  return out;
}

std::size_t chunk_count(std::size_t frames, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("window and stride must be positive");
  return frames < window ? 0 : (frames - window) / stride + 1;
}

std::vector<std::size_t> chunk_starts(std::size_t frames, std::size_t window, std::size_t stride) {
  std::vector<std::size_t> starts(chunk_count(frames, window, stride));
  for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = i * stride;
  return starts;
}

Chunk build_chunk(std::vector<Image> raw, TaillightState label, ChunkOrigin origin, const ChunkOptions& options) {
  if (raw.size() != options.window)
    throw DataError("chunk needs " + std::to_string(options.window) + " frames, got " + std::to_string(raw.size()));
  Chunk chunk;
  chunk.label = label;
  chunk.origin = std::move(origin);
  chunk.net_input.reserve(raw.size());
  chunk.net_input.push_back(raw.front());
  if (raw.size() > 1)
    for (auto& d : align_and_diff(raw, options.align, options.max_shift)) chunk.net_input.push_back(std::move(d));
  chunk.raw = std::move(raw);
  return chunk;
}

Chunk chunk_at(const FrameSequence& seq, std::size_t start, const ChunkOptions& options) {
  if (start + options.window > seq.frames.size()) throw DataError("chunk runs past the end of " + seq.source_id);
  std::vector<Image> raw(seq.frames.begin() + static_cast<long>(start),
                         seq.frames.begin() + static_cast<long>(start + options.window));
  return build_chunk(std::move(raw), seq.label, {seq.source_id, start}, options);
}

std::vector<Chunk> make_chunks(const FrameSequence& seq, const ChunkOptions& options) {
  const auto starts = chunk_starts(seq.frames.size(), options.window, options.stride);
  if (starts.empty()) {
    log_warning("sequence " + seq.source_id + " has " + std::to_string(seq.frames.size()) +
                " frames, fewer than the window of " + std::to_string(options.window) + "; skipped");
    return {};
  }
  // pairwise differences do not depend on the chunk, so compute them once
  std::vector<Image> diffs;
  if (options.window > 1) diffs = align_and_diff(seq.frames, options.align, options.max_shift);
  std::vector<Chunk> chunks;
  chunks.reserve(starts.size());
  for (std::size_t s : starts) {
    Chunk c;
    c.label = seq.label;
    c.origin = {seq.source_id, s};
    c.raw.assign(seq.frames.begin() + static_cast<long>(s),
                 seq.frames.begin() + static_cast<long>(s + options.window));
    c.net_input.push_back(c.raw.front());
    for (std::size_t t = 0; t + 1 < options.window; ++t) c.net_input.push_back(diffs[s + t]);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

template <typename T>
Tensor<T> chunk_tensor(const Chunk& chunk) {
  if (chunk.net_input.empty()) throw DataError("empty chunk");
  const Image& f0 = chunk.net_input.front();
  const std::size_t n = chunk.net_input.size(), c = f0.channels, h = f0.height, w = f0.width;
  std::vector<T> data(n * c * h * w);
  for (std::size_t t = 0; t < n; ++t) {
    const Image& img = chunk.net_input[t];
    if (!img.same_geometry(f0)) throw ShapeError("chunk frames differ in size");
    T* dst = data.data() + t * c * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t k = 0; k < c; ++k)
          dst[(k * h + y) * w + x] = static_cast<T>(img.pixels[(y * w + x) * c + k]) / T(255);
  }
  return Tensor<T>({n, c, h, w}, std::move(data));
}

template Tensor<float> chunk_tensor<float>(const Chunk&);
template Tensor<double> chunk_tensor<double>(const Chunk&);

}  // namespace taillight
