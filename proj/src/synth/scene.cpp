#include "taillight/synth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "taillight/error.hpp"

namespace taillight {

namespace {

PixelRect to_pixels(const FracRect& r, std::size_t side) {
  auto px = [side](double f) { return static_cast<std::size_t>(std::lround(f * static_cast<double>(side))); };
  return {px(r.x0), px(r.y0), px(r.x1), px(r.y1)};
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

SceneLayout scene_layout(const SceneParams& p) {
  return {to_pixels(p.body, p.image_side), to_pixels(p.left_lamp, p.image_side), to_pixels(p.right_lamp, p.image_side),
          to_pixels(p.center_bar, p.image_side)};
}

void SceneParams::validate() const {
  if (image_side < 8) throw ConfigError("image_side must be at least 8");
  for (const FracRect* r : {&body, &left_lamp, &right_lamp, &center_bar})
    if (!(0 <= r->x0 && r->x0 < r->x1 && r->x1 <= 1 && 0 <= r->y0 && r->y0 < r->y1 && r->y1 <= 1))
      throw ConfigError("scene rectangle outside the unit square or empty");
  const auto l = scene_layout(*this);
  if (l.left_lamp.area() == 0 || l.right_lamp.area() == 0 || l.center_bar.area() == 0)
    throw ConfigError("lamp regions vanish at image_side " + std::to_string(image_side));
  if (l.left_lamp.overlaps(l.right_lamp)) throw ConfigError("lamp regions overlap");
  if (!l.left_lamp.inside(l.body) || !l.right_lamp.inside(l.body) || !l.center_bar.inside(l.body))
    throw ConfigError("lamps must lie inside the vehicle body");
  if (blink_period < 2 || blink_period > window)
    throw ConfigError("blink_period must be in [2, window], got " + std::to_string(blink_period));
  if (!(duty_cycle > 0 && duty_cycle < 1)) throw ConfigError("duty_cycle must be in (0, 1)");
  if (!(0 <= off_level && off_level < brake_level && brake_level < on_level && on_level <= 1))
    throw ConfigError("lamp levels must satisfy 0 <= off < brake < on <= 1");
  if (noise_sigma < 0 || jitter < 0) throw ConfigError("noise_sigma and jitter must be >= 0");
  if (distractor_prob < 0 || distractor_prob > 1) throw ConfigError("distractor_prob must be in [0, 1]");
  if (distractor_size <= 0 || distractor_strength < 0 || distractor_strength > 1)
    throw ConfigError("distractor size must be > 0 and strength in [0, 1]");
}

double lamp_level(const SceneParams& p, bool brake, bool blinking, std::size_t t, std::size_t phase) {
  double level = brake ? p.brake_level : p.off_level;
  if (blinking) {
    const std::size_t on_frames = static_cast<std::size_t>(std::lround(p.duty_cycle * p.blink_period));
    if ((t + phase) % p.blink_period < on_frames) level = p.on_level;
  }
  return level;
}

FrameSequence render_sequence(TaillightState state, const SceneParams& p, std::size_t length, std::uint64_t seed) {
  p.validate();
  if (length < p.window)
    throw ConfigError("sequence length " + std::to_string(length) + " is shorter than the window");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t side = p.image_side;
  const SceneLayout lay = scene_layout(p);

  // static background: per-sequence gray level, vertical gradient, speckle
  const double bg = 110 + 40 * unit(rng);
  const double grad = 30 * (unit(rng) - 0.5);
  std::vector<double> speckle(side * side);
  for (auto& s : speckle) s = 24 * (unit(rng) - 0.5);
  const double body_tint = 20 * (unit(rng) - 0.5);
  const std::size_t phase = static_cast<std::size_t>(unit(rng) * static_cast<double>(p.blink_period)) % p.blink_period;

  const bool distract = unit(rng) < p.distractor_prob;
  const double radius = p.distractor_size * static_cast<double>(side);
  double dx0 = lay.body.x0 + unit(rng) * static_cast<double>(lay.body.x1 - lay.body.x0);
  double dy0 = lay.body.y0 + unit(rng) * static_cast<double>(lay.body.y1 - lay.body.y0);
  const double speed = (unit(rng) < 0.5 ? -1 : 1) * (0.5 + unit(rng)) * static_cast<double>(side) / 48.0;
  const double vy = (unit(rng) - 0.5) * static_cast<double>(side) / 96.0;

  std::normal_distribution<double> noise(0.0, p.noise_sigma);
  std::uniform_int_distribution<int> jit(-p.jitter, p.jitter);

  FrameSequence seq;
  seq.label = state;
  seq.frames.reserve(length);
  std::vector<double> canvas(side * side * 3);
  for (std::size_t t = 0; t < length; ++t) {
    const double left = lamp_level(p, state.brake, state.left, t, phase);
    const double right = lamp_level(p, state.brake, state.right, t, phase);
    const double bar = state.brake ? p.on_level : p.off_level * 0.5;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        double* px = &canvas[(y * side + x) * 3];
        const double g = bg + grad * (static_cast<double>(y) / side - 0.5) + speckle[y * side + x];
        px[0] = px[1] = px[2] = g;
        if (lay.body.contains(x, y))
          for (int c = 0; c < 3; ++c) px[c] = p.body_color[c] + body_tint + 0.25 * speckle[y * side + x];
        double level = -1;
        if (lay.left_lamp.contains(x, y)) level = left;
        else if (lay.right_lamp.contains(x, y)) level = right;
        else if (lay.center_bar.contains(x, y)) level = bar;
        if (level >= 0)
          for (int c = 0; c < 3; ++c) px[c] = p.lamp_color[c] * level;
      }
    }
    if (distract) {
      const double cx = dx0 + speed * static_cast<double>(t), cy = dy0 + vy * static_cast<double>(t);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double ex = (static_cast<double>(x) - cx) / radius, ey = (static_cast<double>(y) - cy) / (0.6 * radius);
          const double r2 = ex * ex + ey * ey;
          if (r2 >= 1) continue;
          const double a = p.distractor_strength * (1 - r2);
          double* px = &canvas[(y * side + x) * 3];
          for (int c = 0; c < 3; ++c) px[c] += a * (255 - px[c]);
        }
    }
    const int sx = jit(rng), sy = jit(rng);
    Image frame(side, side, 3);
    for (std::size_t y = 0; y < side; ++y) {
      const long yy = std::clamp(static_cast<long>(y) - sy, 0L, static_cast<long>(side) - 1);
      for (std::size_t x = 0; x < side; ++x) {
        const long xx = std::clamp(static_cast<long>(x) - sx, 0L, static_cast<long>(side) - 1);
        for (int c = 0; c < 3; ++c) {
          double v = canvas[(yy * side + xx) * 3 + c];
          if (p.noise_sigma > 0) v += noise(rng);
          frame.pixels[(y * side + x) * 3 + c] = to_byte(v);
        }
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace taillight
