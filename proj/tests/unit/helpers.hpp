#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "taillight/autodiff/tensor.hpp"

namespace taillight::testing {

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

// Plain nested-loop convolution over [C,H,W] input and [O,C,K,K] kernel.
inline std::vector<double> conv_reference(const std::vector<double>& in, std::size_t C, std::size_t H, std::size_t W,
                                          const Tensor<double>& k, std::size_t stride, std::size_t pad,
                                          std::size_t& oh, std::size_t& ow) {
  const std::size_t O = k.dim(0), K = k.dim(2);
  oh = (H + 2 * pad - K) / stride + 1;
  ow = (W + 2 * pad - K) / stride + 1;
  std::vector<double> out(O * oh * ow, 0.0);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) {
              const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
              const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              acc += in[(c * H + iy) * W + ix] * k[((o * C + c) * K + i) * K + j];
            }
        out[(o * oh + y) * ow + x] = acc;
      }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("taillight_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace taillight::testing
