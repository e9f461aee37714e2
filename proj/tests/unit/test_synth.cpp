#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "helpers.hpp"
#include "taillight/error.hpp"
#include "taillight/synth/dataset.hpp"
#include "taillight/synth/netpbm.hpp"
#include "taillight/synth/scene.hpp"

using namespace taillight;
using taillight::testing::TempDir;
namespace fs = std::filesystem;

namespace {

SceneParams clean_scene(std::size_t side = 48) {
  SceneParams p;
  p.image_side = side;
  p.noise_sigma = 0;
  p.jitter = 0;
  p.distractor_prob = 0;
  return p;
}

// Mean red value over a lamp rectangle, shrunk by `margin` pixels.
double region_mean(const Image& img, const PixelRect& r, std::size_t margin = 0) {
  double s = 0, n = 0;
  for (std::size_t y = r.y0 + margin; y < r.y1 - margin; ++y)
    for (std::size_t x = r.x0 + margin; x < r.x1 - margin; ++x) {
      s += img.at(x, y, 0);
      n += 1;
    }
  return s / n;
}

std::vector<double> lamp_series(const FrameSequence& seq, const PixelRect& r, std::size_t margin = 0) {
  std::vector<double> out;
  for (const auto& f : seq.frames) out.push_back(region_mean(f, r, margin));
  return out;
}

// Reads the state back from pixels: brake from the centre bar, turn signals
// from the swing of each lamp's mean.
TaillightState read_state(const FrameSequence& seq, const SceneParams& p) {
  const auto lay = scene_layout(p);
  const double mid = 0.5 * (p.off_level + p.brake_level) * p.lamp_color[0];
  const auto bar = lamp_series(seq, lay.center_bar);
  const auto swing = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
  };
  const double blink = 0.5 * (p.on_level - p.brake_level) * p.lamp_color[0];
  TaillightState s;
  s.brake = *std::min_element(bar.begin(), bar.end()) > mid;
  s.left = swing(lamp_series(seq, lay.left_lamp, 1)) > blink;
  s.right = swing(lamp_series(seq, lay.right_lamp, 1)) > blink;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

DatasetSpec small_spec(std::uint64_t seed) {
  DatasetSpec spec;
  spec.scene.image_side = 16;
  spec.scene.blink_period = 4;
  spec.scene.window = 8;
  spec.sequence_length = 8;
  spec.seed = seed;
  spec.train_counts = {2, 1, 1, 1, 1, 1, 1, 1};
  spec.test_counts = {1, 0, 0, 0, 0, 0, 0, 1};
  return spec;
}

}  // namespace

TEST(Scene, StaticStateGivesIdenticalFramesAtOffLevel) {
  const auto p = clean_scene();
  const auto seq = render_sequence(TaillightState::parse("OOO"), p, 20, 5);
  for (const auto& f : seq.frames) EXPECT_EQ(f, seq.frames[0]);
  const auto lay = scene_layout(p);
  EXPECT_NEAR(region_mean(seq.frames[0], lay.left_lamp), p.off_level * p.lamp_color[0], 0.5);
  EXPECT_NEAR(region_mean(seq.frames[0], lay.right_lamp), p.off_level * p.lamp_color[0], 0.5);
}

TEST(Scene, LeftSignalAlternatesFourOnFourOff) {
  const auto p = clean_scene();
  const auto seq = render_sequence(TaillightState::parse("OLO"), p, 32, 6);
  const auto lay = scene_layout(p);
  const auto left = lamp_series(seq, lay.left_lamp);
  const auto right = lamp_series(seq, lay.right_lamp);
  const double hi = p.on_level * p.lamp_color[0], lo = p.off_level * p.lamp_color[0];
  std::size_t first_on = 0;
  while (left[first_on] < 0.5 * (hi + lo)) ++first_on;
  ASSERT_LT(first_on, 8u);
  for (std::size_t t = 0; t < left.size(); ++t) {
    const bool on = (t + 8 - first_on) % 8 < 4;
    EXPECT_NEAR(left[t], on ? hi : lo, 0.5) << "t=" << t;
    EXPECT_NEAR(right[t], lo, 0.5);
  }
}

TEST(Scene, BrakeKeepsBlinkingLampsAboveBrakeLevel) {
  auto p = clean_scene();
  p.noise_sigma = 0;
  const auto seq = render_sequence(TaillightState::parse("BLR"), p, 32, 7);
  const auto lay = scene_layout(p);
  for (const auto* r : {&lay.left_lamp, &lay.right_lamp}) {
    const auto v = lamp_series(seq, *r);
    EXPECT_GE(*std::min_element(v.begin(), v.end()), p.brake_level * p.lamp_color[0] - 0.5);
    EXPECT_NEAR(*std::max_element(v.begin(), v.end()), p.on_level * p.lamp_color[0], 0.5);
  }
}

TEST(Scene, RuleBasedReaderRecoversEveryLabel) {
  auto p = clean_scene();
  p.jitter = 1;
  for (std::size_t k = 0; k < 8; ++k)
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto state = TaillightState::from_index(k);
      EXPECT_EQ(read_state(render_sequence(state, p, 48, seed * 31 + k), p), state) << state.code() << " " << seed;
    }
}

TEST(Scene, AutocorrelationPeaksAtBlinkPeriod) {
  for (std::size_t period : {4, 6, 8}) {
    auto p = clean_scene();
    p.blink_period = period;
    const auto seq = render_sequence(TaillightState::parse("OOR"), p, 48, period);
    auto v = lamp_series(seq, scene_layout(p).right_lamp);
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (auto& x : v) x -= m;
    std::size_t best = 0;
    double best_r = -1e300;
    for (std::size_t lag = 1; lag <= period + period / 2; ++lag) {
      double r = 0;
      for (std::size_t t = 0; t + lag < v.size(); ++t) r += v[t] * v[t + lag];
      r /= static_cast<double>(v.size() - lag);
      if (r > best_r + 1e-9) {
        best_r = r;
        best = lag;
      }
    }
    EXPECT_EQ(best, period);
  }
}

TEST(Scene, ValidationRejectsBadGeometry) {
  SceneParams p;
  p.blink_period = 17;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SceneParams{};
  p.right_lamp = {0.20, 0.34, 0.40, 0.52};
  EXPECT_THROW(p.validate(), ConfigError);
  p = SceneParams{};
  p.left_lamp = {0.02, 0.34, 0.34, 0.52};
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(render_sequence({}, SceneParams{}, 10, 1), ConfigError);
}

TEST(Dataset, ScaledTableCountsReproduceInHistogram) {
  const ClassCounts table{3256, 2247, 761, 903, 707, 373, 149, 246};
  const auto scaled = scale_counts(table, 1.0 / 50);
  EXPECT_EQ(scaled, (ClassCounts{65, 45, 15, 18, 14, 7, 3, 5}));
  TempDir dir("table");
  DatasetSpec spec;
  spec.scene.image_side = 16;
  spec.scene.blink_period = 2;
  spec.scene.window = 2;
  spec.sequence_length = 2;
  spec.train_counts = scaled;
  const auto m = generate_dataset(dir.path(), spec);
  EXPECT_EQ(m.histogram(Split::kTrain), scaled);
  EXPECT_EQ(m.histogram(Split::kTest), ClassCounts{});
  EXPECT_EQ(read_manifest(dir.path()).histogram(Split::kTrain), scaled);
  const auto table_text = distribution_table(m);
  EXPECT_EQ(table_text,
            "Class,OOO,BOO,OLO,BLO,OOR,BOR,OLR,BLR,Total\n"
            "Train samples,65,45,15,18,14,7,3,5,172\n"
            "Test samples,0,0,0,0,0,0,0,0,0\n");
}

TEST(Dataset, ZeroCountsWriteNoSequences) {
  TempDir dir("empty");
  DatasetSpec spec;
  const auto m = generate_dataset(dir.path(), spec);
  EXPECT_TRUE(m.records.empty());
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    EXPECT_EQ(e.path().filename(), "manifest.csv");
    ++entries;
  }
  EXPECT_EQ(entries, 1u);
  EXPECT_TRUE(read_manifest(dir.path()).records.empty());
}

TEST(Dataset, SameSeedGivesByteIdenticalFiles) {
  TempDir a("det_a"), b("det_b"), c("det_c");
  generate_dataset(a.path(), small_spec(3));
  generate_dataset(b.path(), small_spec(3));
  generate_dataset(c.path(), small_spec(4));
  std::size_t files = 0;
  bool any_differs = false;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.path());
    ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / rel)) << rel;
    if (rel.extension() == ".ppm") any_differs |= slurp(e.path()) != slurp(c.path() / rel);
    ++files;
  }
  EXPECT_EQ(files, 11u * 8 + 1);
  EXPECT_TRUE(any_differs);
}

TEST(Dataset, ReadBackMatchesRenderer) {
  TempDir dir("roundtrip");
  const auto spec = small_spec(9);
  const auto written = generate_dataset(dir.path(), spec);
  DatasetReader reader(dir.path());
  ASSERT_EQ(reader.manifest().records.size(), written.records.size());
  for (std::size_t i = 0; i < written.records.size(); ++i) {
    const auto& r = reader.manifest().records[i];
    EXPECT_EQ(r.path, written.records[i].path);
    EXPECT_EQ(r.label, written.records[i].label);
    EXPECT_EQ(r.split, written.records[i].split);
  }
  const auto tests = reader.load_split(Split::kTest);
  ASSERT_EQ(tests.size(), 2u);
  const auto expect = render_sequence(TaillightState::parse("BLR"), spec.scene, spec.sequence_length,
                                      sequence_seed(spec.seed, Split::kTest, 7, 0));
  EXPECT_EQ(tests[1].label.code(), "BLR");
  EXPECT_EQ(tests[1].frames, expect.frames);
}

TEST(Netpbm, RoundTripBothFormats) {
  TempDir dir("pnm");
  Image rgb(5, 3, 3), g(4, 2, 1);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) rgb.pixels[i] = static_cast<std::uint8_t>(i * 17);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = static_cast<std::uint8_t>(250 - i);
  write_ppm(dir / "a.ppm", rgb);
  write_pgm(dir / "b.pgm", g);
  EXPECT_EQ(read_ppm(dir / "a.ppm"), rgb);
  EXPECT_EQ(read_pgm(dir / "b.pgm"), g);
  EXPECT_EQ(slurp(dir / "b.pgm").substr(0, 11), "P5\n4 2\n255\n");
}

TEST(DatasetErrors, EachFailureHasItsOwnMessage) {
  TempDir dir("errors");
  generate_dataset(dir.path(), small_spec(5));
  DatasetReader reader(dir.path());
  const auto rec = reader.manifest().records[0];
  const auto frame = dir.path() / rec.path / "frame_0003.ppm";

  auto message = [&](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const DataError& e) {
      return e.what();
    }
    return "no error";
  };

  // truncated: cut the pixel data short
  const auto bytes = slurp(frame);
  {
    std::ofstream out(frame, std::ios::binary | std::ios::trunc);
    out << bytes.substr(0, bytes.size() - 100);
  }
  const auto truncated = message([&] { reader.load(rec); });
  EXPECT_NE(truncated.find("truncated"), std::string::npos) << truncated;
  EXPECT_NE(truncated.find("byte offset " + std::to_string(bytes.size() - 100)), std::string::npos) << truncated;
  EXPECT_NE(truncated.find(frame.string()), std::string::npos);

  {
    std::ofstream out(frame, std::ios::binary | std::ios::trunc);
    out << "P3\n16 16\n255\n";
  }
  const auto malformed = message([&] { reader.load(rec); });
  EXPECT_NE(malformed.find("malformed image header"), std::string::npos) << malformed;

  fs::remove(frame);
  const auto missing = message([&] { reader.load(rec); });
  EXPECT_NE(missing.find("missing frame file " + frame.string()), std::string::npos) << missing;

  auto manifest = slurp(dir / "manifest.csv");
  manifest.replace(manifest.find(",OOO,"), 5, ",OXO,");
  {
    std::ofstream out(dir / "manifest.csv", std::ios::trunc);
    out << manifest;
  }
  const auto code = message([&] { read_manifest(dir.path()); });
  EXPECT_NE(code.find("unknown class code 'OXO'"), std::string::npos) << code;

  EXPECT_EQ(message([&] { read_ppm(dir / "nothing.ppm"); }).find("cannot open image file"), 0u);
  EXPECT_NE(message([&] { DatasetReader bad(dir / "absent"); }).find("manifest"), std::string::npos);
}
