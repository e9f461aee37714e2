#include "taillight/preprocess/image.hpp"

#include <algorithm>
#include <cmath>

#include "taillight/error.hpp"

namespace taillight {

Image resize_bilinear(const Image& src, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ShapeError("resize target must be non-empty");
  if (src.width == 0 || src.height == 0) throw ShapeError("cannot resize an empty image");
  if (src.width == width && src.height == height) return src;
  Image dst(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (std::size_t y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    auto y0 = static_cast<std::size_t>(fy);
    std::size_t y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    for (std::size_t x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      auto x0 = static_cast<std::size_t>(fx);
      std::size_t x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      for (std::size_t c = 0; c < src.channels; ++c) {
        double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
        double bot = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
        double v = top * (1 - wy) + bot * wy;
        dst.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

Image flip_horizontal(const Image& src) {
  Image dst(src.width, src.height, src.channels);
  for (std::size_t y = 0; y < src.height; ++y)
    for (std::size_t x = 0; x < src.width; ++x)
      for (std::size_t c = 0; c < src.channels; ++c) dst.at(src.width - 1 - x, y, c) = src.at(x, y, c);
  return dst;
}

}  // namespace taillight
