#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace taillight {

// 8-bit image, interleaved channels, row-major (the PPM/PGM byte layout).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c = 3, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
  bool same_geometry(const Image& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  bool operator==(const Image&) const = default;
};

// Half-pixel-centred bilinear resampling, rounded to nearest.
Image resize_bilinear(const Image& src, std::size_t width, std::size_t height);
Image flip_horizontal(const Image& src);

}  // namespace taillight
