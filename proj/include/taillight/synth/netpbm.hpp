#pragma once

#include <filesystem>

#include "taillight/preprocess/image.hpp"

namespace taillight {

// Binary P6 (RGB) and P5 (gray), maxval 255. Readers throw DataError with
// the path, and for short files the byte offset where data ran out.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);

}  // namespace taillight
