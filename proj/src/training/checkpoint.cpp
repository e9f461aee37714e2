#include "taillight/training/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "taillight/error.hpp"

namespace fs = std::filesystem;

namespace taillight {

namespace {

constexpr char kMagic[8] = {'T', 'L', 'A', 'T', 'T', 'N', '0', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    uint<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  template <typename T>
  void tensor(const std::string& name, const Tensor<T>& t) {
    str(name);
    uint<std::uint8_t>(static_cast<std::uint8_t>(PrecisionOf<T>::value));
    uint<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) uint<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (T v : t.values()) {
      if constexpr (sizeof(T) == 4)
        uint(std::bit_cast<std::uint32_t>(v));
      else
        uint(std::bit_cast<std::uint64_t>(v));
    }
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::size_t end, std::string path)
      : buf_(buf), end_(end), path_(std::move(path)) {}

  void need(std::size_t n) const {
    if (end_ - pos_ < n)
      throw DataError("truncated checkpoint " + path_ + " at byte offset " + std::to_string(pos_));
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  template <typename T>
  std::pair<std::string, Tensor<T>> tensor() {
    std::string name = str();
    const auto dtype = uint<std::uint8_t>();
    if (dtype > 1) throw DataError("unknown dtype " + std::to_string(dtype) + " for " + name + " in " + path_);
    const auto rank = uint<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = uint<std::uint32_t>();
    std::vector<T> values(numel(shape));
    for (auto& v : values) {
      if (dtype == 0)
        v = static_cast<T>(std::bit_cast<float>(uint<std::uint32_t>()));
      else
        v = static_cast<T>(std::bit_cast<double>(uint<std::uint64_t>()));
    }
    return {std::move(name), Tensor<T>(std::move(shape), std::move(values))};
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t end_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t crc_of(const std::vector<std::uint8_t>& buf, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), buf.data(), static_cast<uInt>(n)));
}

// Verifies magic, version and CRC; returns the reader positioned after the version.
Reader open_checked(const std::vector<std::uint8_t>& buf, const fs::path& path) {
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  const std::size_t body = buf.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf[body + i]) << (8 * i);
  if (stored != crc_of(buf, body)) throw DataError("checkpoint CRC mismatch in " + path.string());
  Reader r(buf, body, path.string());
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.uint<std::uint8_t>();
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  return r;
}

int parse_stage_line(const std::string& config_block, const fs::path& path) {
  std::istringstream in(config_block);
  std::string line;
  if (std::getline(in, line) && line.rfind("stage = ", 0) == 0) return std::stoi(line.substr(8));
  throw DataError("checkpoint config block lacks a stage line: " + path.string());
}

std::string strip_first_line(const std::string& s) {
  const auto nl = s.find('\n');
  return nl == std::string::npos ? "" : s.substr(nl + 1);
}

}  // namespace

template <typename T>
void save_checkpoint(const fs::path& path, const Checkpoint<T>& ck) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.str("stage = " + std::to_string(ck.stage) + "\n" + ck.config_text);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ck.params.size() + ck.momentum.size()));
  for (const auto& [name, t] : ck.params.all()) w.tensor(name, t);
  for (const auto& [name, t] : ck.momentum) w.tensor("momentum/" + name, t);
  w.str(ck.rng_state);
  auto& buf = w.buffer();
  w.uint<std::uint32_t>(crc_of(buf, buf.size()));

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

template <typename T>
Checkpoint<T> load_checkpoint(const fs::path& path) {
  const auto buf = read_file(path);
  Reader r = open_checked(buf, path);
  Checkpoint<T> ck;
  const std::string block = r.str();
  ck.stage = parse_stage_line(block, path);
  ck.config_text = strip_first_line(block);
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = r.template tensor<T>();
    if (name.rfind("momentum/", 0) == 0)
      ck.momentum.emplace(name.substr(9), std::move(t));
    else
      ck.params.set(name, std::move(t));
  }
  ck.rng_state = r.str();
  return ck;
}

CheckpointInfo peek_checkpoint(const fs::path& path) {
  const auto buf = read_file(path);
  Reader r = open_checked(buf, path);
  CheckpointInfo info;
  const std::string block = r.str();
  info.stage = parse_stage_line(block, path);
  info.config_text = strip_first_line(block);
  if (r.uint<std::uint32_t>() > 0) {
    r.str();
    info.stored = static_cast<Precision>(r.uint<std::uint8_t>());
  }
  return info;
}

template void save_checkpoint<float>(const fs::path&, const Checkpoint<float>&);
template void save_checkpoint<double>(const fs::path&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint<float>(const fs::path&);
template Checkpoint<double> load_checkpoint<double>(const fs::path&);

}  // namespace taillight
