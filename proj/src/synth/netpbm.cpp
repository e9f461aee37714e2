#include "taillight/synth/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "taillight/error.hpp"

namespace taillight {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image read_netpbm(const std::filesystem::path& path, char kind, std::size_t channels) {
  const auto bytes = slurp(path);
  std::size_t pos = 0;
  auto malformed = [&](const std::string& why) {
    return DataError("malformed image header in " + path.string() + ": " + why);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != kind)
    throw malformed(std::string("expected magic P") + kind);
  pos = 2;
  auto next_number = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw malformed("expected a number at byte " + std::to_string(pos));
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 20)) throw malformed("value too large");
    }
    return v;
  };
  const std::size_t w = next_number(), h = next_number(), maxval = next_number();
  if (w == 0 || h == 0) throw malformed("zero dimension");
  if (maxval != 255) throw malformed("maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw malformed("missing separator before pixel data");
  ++pos;
  Image img(w, h, channels);
  const std::size_t need = img.pixels.size();
  if (bytes.size() - pos < need)
    throw DataError("truncated image file " + path.string() + ": pixel data ends at byte offset " +
                    std::to_string(bytes.size()) + ", expected " + std::to_string(pos + need));
  std::copy(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + need), img.pixels.begin());
  return img;
}

void write_netpbm(const std::filesystem::path& path, const Image& image, char kind, std::size_t channels) {
  if (image.channels != channels)
    throw ShapeError(std::string("P") + kind + " needs " + std::to_string(channels) + " channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << 'P' << kind << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) { return read_netpbm(path, '6', 3); }
void write_ppm(const std::filesystem::path& path, const Image& image) { write_netpbm(path, image, '6', 3); }
Image read_pgm(const std::filesystem::path& path) { return read_netpbm(path, '5', 1); }
void write_pgm(const std::filesystem::path& path, const Image& image) { write_netpbm(path, image, '5', 1); }

}  // namespace taillight
