#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "taillight/preprocess/chunk.hpp"

namespace taillight {

// Rectangle in fractions of the image side, [x0, x1) x [y0, y1).
struct FracRect {
  double x0, y0, x1, y1;
};

// Pixel rectangle, half-open.
struct PixelRect {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::size_t area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(std::size_t x, std::size_t y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool overlaps(const PixelRect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  bool inside(const PixelRect& o) const { return x0 >= o.x0 && x1 <= o.x1 && y0 >= o.y0 && y1 <= o.y1; }
};

struct SceneParams {
  std::size_t image_side = 96;
  FracRect body{0.10, 0.22, 0.90, 0.86};
  std::array<double, 3> body_color{70, 78, 96};
  FracRect left_lamp{0.14, 0.34, 0.34, 0.52};
  FracRect right_lamp{0.66, 0.34, 0.86, 0.52};
  FracRect center_bar{0.40, 0.26, 0.60, 0.31};
  std::array<double, 3> lamp_color{255, 120, 60};
  // lamp level multiplies lamp_color
  double off_level = 0.25;
  double brake_level = 0.65;
  double on_level = 1.0;
  std::size_t blink_period = 8;
  double duty_cycle = 0.5;
  double noise_sigma = 4.0;
  int jitter = 1;
  double distractor_prob = 0.5;
  double distractor_size = 0.18;  // radius as a fraction of the side
  double distractor_strength = 0.5;
  std::size_t window = 16;  // for the period bound

  // Throws ConfigError.
  void validate() const;
};

struct SceneLayout {
  PixelRect body, left_lamp, right_lamp, center_bar;
};

SceneLayout scene_layout(const SceneParams& params);

// Lamp level at frame t for a lamp whose blink bit is `blinking`.
double lamp_level(const SceneParams& params, bool brake, bool blinking, std::size_t t, std::size_t phase);

FrameSequence render_sequence(TaillightState state, const SceneParams& params, std::size_t length,
                              std::uint64_t seed);

}  // namespace taillight
