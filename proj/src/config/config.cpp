#include "taillight/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "taillight/error.hpp"

namespace taillight {

const char* loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::kTopK: return "top_k";
    case LossMode::kSoftBootstrap: return "soft_bootstrap";
    case LossMode::kHardBootstrap: return "hard_bootstrap";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& name) {
  if (name == "top_k") return LossMode::kTopK;
  if (name == "soft_bootstrap") return LossMode::kSoftBootstrap;
  if (name == "hard_bootstrap") return LossMode::kHardBootstrap;
  throw ConfigError("unknown loss_mode '" + name + "' (top_k, soft_bootstrap, hard_bootstrap)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(bootstrap_ratio > 0 && bootstrap_ratio <= 1)) throw ConfigError("bootstrap_ratio must be in (0, 1]");
  if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError("bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

template <typename N>
std::vector<N> parse_list(const std::string& key, const std::string& v) {
  std::vector<N> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<N>(key, trim(item)));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

template <typename N, std::size_t K>
std::array<N, K> parse_array(const std::string& key, const std::string& v) {
  auto list = parse_list<N>(key, v);
  if (list.size() != K) throw ConfigError(key + " needs " + std::to_string(K) + " values");
  std::array<N, K> out{};
  std::copy(list.begin(), list.end(), out.begin());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename N>
std::string fmt(N v) {
  return std::to_string(v);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename Seq>
std::string fmt_list(const Seq& s) {
  std::string out;
  for (const auto& x : s) {
    if (!out.empty()) out += ",";
    out += fmt(x);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

#define NUM_FIELD(name, member, type)                                                   \
  Field {                                                                               \
    name, [](Config& c, const std::string& v) { c.member = parse_number<type>(name, v); }, \
        [](const Config& c) { return fmt(c.member); }                                   \
  }
#define BOOL_FIELD(name, member)                                                   \
  Field {                                                                          \
    name, [](Config& c, const std::string& v) { c.member = parse_bool(name, v); }, \
        [](const Config& c) { return fmt(c.member); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      NUM_FIELD("input_side", model.backbone.input_side, std::size_t),
      Field{"stage_channels",
            [](Config& c, const std::string& v) { c.model.backbone.stage_channels = parse_list<std::size_t>("stage_channels", v); },
            [](const Config& c) { return fmt_list(c.model.backbone.stage_channels); }},
      NUM_FIELD("split_l", model.backbone.split_l, std::size_t),
      NUM_FIELD("feature_dim", model.backbone.feature_dim, std::size_t),
      NUM_FIELD("hidden_size", model.hidden_size, std::size_t),
      NUM_FIELD("attn_hidden", model.attn_hidden, std::size_t),

      NUM_FIELD("window", chunk.window, std::size_t),
      NUM_FIELD("chunk_stride", chunk.stride, std::size_t),
      Field{"align_mode", [](Config& c, const std::string& v) { c.chunk.align = parse_align_mode(v); },
            [](const Config& c) { return std::string(align_mode_name(c.chunk.align)); }},
      NUM_FIELD("max_shift", chunk.max_shift, int),

      BOOL_FIELD("augment", augment),
      NUM_FIELD("brightness", augment_ranges.brightness, double),
      NUM_FIELD("contrast", augment_ranges.contrast, double),
      NUM_FIELD("color_balance", augment_ranges.color, double),
      NUM_FIELD("flip_prob", augment_ranges.flip_prob, double),

      NUM_FIELD("image_side", data.scene.image_side, std::size_t),
      NUM_FIELD("sequence_length", data.sequence_length, std::size_t),
      Field{"train_counts",
            [](Config& c, const std::string& v) { c.data.train_counts = parse_array<std::size_t, 8>("train_counts", v); },
            [](const Config& c) { return fmt_list(c.data.train_counts); }},
      Field{"test_counts",
            [](Config& c, const std::string& v) { c.data.test_counts = parse_array<std::size_t, 8>("test_counts", v); },
            [](const Config& c) { return fmt_list(c.data.test_counts); }},
      NUM_FIELD("blink_period", data.scene.blink_period, std::size_t),
      NUM_FIELD("duty_cycle", data.scene.duty_cycle, double),
      NUM_FIELD("noise_sigma", data.scene.noise_sigma, double),
      NUM_FIELD("jitter", data.scene.jitter, int),
      NUM_FIELD("distractor_prob", data.scene.distractor_prob, double),
      NUM_FIELD("distractor_size", data.scene.distractor_size, double),
      NUM_FIELD("distractor_strength", data.scene.distractor_strength, double),
      NUM_FIELD("data_seed", data.seed, std::uint64_t),

      NUM_FIELD("batch_size", train.batch_size, std::size_t),
      NUM_FIELD("learning_rate", train.learning_rate, double),
      NUM_FIELD("momentum", train.momentum, double),
      Field{"epochs", [](Config& c, const std::string& v) { c.train.epochs = parse_array<std::size_t, 3>("epochs", v); },
            [](const Config& c) { return fmt_list(c.train.epochs); }},
      NUM_FIELD("bootstrap_ratio", train.bootstrap_ratio, double),
      Field{"loss_mode", [](Config& c, const std::string& v) { c.train.loss_mode = parse_loss_mode(v); },
            [](const Config& c) { return std::string(loss_mode_name(c.train.loss_mode)); }},
      NUM_FIELD("seed", train.seed, std::uint64_t),
      Field{"precision",
            [](Config& c, const std::string& v) {
              try {
                c.train.precision = parse_precision(v);
              } catch (const std::exception& e) {
                throw ConfigError(e.what());
              }
            },
            [](const Config& c) { return std::string(precision_name(c.train.precision)); }},
      BOOL_FIELD("check_finite", train.check_finite),
      BOOL_FIELD("eval_each_epoch", train.eval_each_epoch),

      NUM_FIELD("gradcheck_probes", gradcheck.probes, std::size_t),
      NUM_FIELD("gradcheck_step", gradcheck.step, double),
      NUM_FIELD("gradcheck_tolerance", gradcheck.tolerance, double),
      NUM_FIELD("gradcheck_seed", gradcheck.seed, std::uint64_t),
  };
  return table;
}

#undef NUM_FIELD
#undef BOOL_FIELD

}  // namespace

Config::Config() {
  data.train_counts.fill(40);
  data.test_counts.fill(15);
}

void Config::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (key == f.key) return f.set(*this, value);
  throw ConfigError("unknown config key '" + key + "'");
}

void Config::validate() {
  data.scene.window = chunk.window;
  try {
    model.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  if (chunk.window < 2) throw ConfigError("window must be at least 2");
  if (chunk.stride == 0) throw ConfigError("chunk_stride must be positive");
  if (chunk.max_shift < 0) throw ConfigError("max_shift must be >= 0");
  if (augment_ranges.brightness < 0 || augment_ranges.brightness >= 1 || augment_ranges.contrast < 0 ||
      augment_ranges.contrast >= 1 || augment_ranges.color < 0 || augment_ranges.color >= 1)
    throw ConfigError("augmentation ranges must be in [0, 1)");
  if (augment_ranges.flip_prob < 0 || augment_ranges.flip_prob > 1) throw ConfigError("flip_prob must be in [0, 1]");
  data.scene.validate();
  if (data.sequence_length < chunk.window) throw ConfigError("sequence_length must be at least the window");
  train.validate();
  if (gradcheck.probes == 0 || !(gradcheck.step > 0) || !(gradcheck.tolerance > 0))
    throw ConfigError("gradcheck settings must be positive");
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError("expected key = value at " + where);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      c.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (" + where + ")");
    }
  }
  c.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

}  // namespace taillight
