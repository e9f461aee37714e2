#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "taillight/config.hpp"
#include "taillight/eval/evaluate.hpp"
#include "taillight/eval/report.hpp"
#include "taillight/synth/netpbm.hpp"
#include "taillight/synth/scene.hpp"
#include "taillight/training/checkpoint.hpp"
#include "taillight/training/trainer.hpp"

using namespace taillight;
using taillight::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<double>> read_csv_numbers(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

fs::path save_random_model(const fs::path& dir, int stage) {
  auto cfg = Config::load(std::string(TAILLIGHT_CONFIG_DIR) + "/tiny.cfg");
  Trainer<float> t(cfg);
  Checkpoint<float> ck;
  ck.stage = stage;
  ck.config_text = cfg.to_text();
  ck.params = t.stage_entry(1, nullptr);
  const auto path = dir / ("stage" + std::to_string(stage) + ".ckpt");
  save_checkpoint(path, ck);
  return path;
}

}  // namespace

TEST(Report, OraclePredictionsScorePerfectly) {
  std::vector<ChunkPrediction> preds;
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t c = 0; c < 4; ++c) preds.push_back({"v" + std::to_string(k) + std::to_string(v), k, k, 0.5});
  const auto r = build_report(preds);
  EXPECT_EQ(r.chunk_level.total, 100.0);
  EXPECT_EQ(r.video_level.total, 100.0);
  EXPECT_EQ(r.video_level.samples, 24u);
  EXPECT_EQ(r.chunk_level.samples, 96u);
  for (const auto& cell : r.chunk_level.per_class) EXPECT_EQ(cell.value(), 100.0);
  EXPECT_DOUBLE_EQ(r.mean_loss, 0.5);
}

TEST(Report, HandTabulatedConfusion) {
  // video a: OLO chunks, one read as OOR; video b: BOO all right
  const std::vector<ChunkPrediction> preds{
      {"a", 2, 2, 0}, {"a", 2, 4, 0}, {"a", 2, 2, 0}, {"b", 1, 1, 0}, {"b", 1, 1, 0}};
  const auto r = build_report(preds);
  EXPECT_EQ(r.chunk_level.confusion[2][2], 2u);
  EXPECT_EQ(r.chunk_level.confusion[2][4], 1u);
  EXPECT_EQ(r.chunk_level.confusion[1][1], 2u);
  EXPECT_NEAR(r.chunk_level.per_class[2].value(), 200.0 / 3, 1e-12);
  EXPECT_EQ(r.chunk_level.per_class[1].value(), 100.0);
  EXPECT_FALSE(r.chunk_level.per_class[0].has_value());
  EXPECT_DOUBLE_EQ(r.chunk_level.total, 80.0);
  EXPECT_EQ(r.video_level.total, 100.0);
  EXPECT_EQ(table_header(), "Method,OOO,BOO,OLO,BLO,OOR,BOR,OLR,BLR,Total\n");
  EXPECT_EQ(table_row("X", r.chunk_level), "X,-,100.0,66.7,-,-,-,-,-,80.0\n");
  const auto csv = confusion_csv(r.chunk_level.confusion);
  EXPECT_NE(csv.find("\nOLO,0,0,2,0,1,0,0,0\n"), std::string::npos) << csv;
}

TEST(Report, MajorityVoteTiesGoLow) {
  EXPECT_EQ(majority_vote(std::vector<std::size_t>{5, 3, 5, 3}), 3u);
  EXPECT_EQ(majority_vote(std::vector<std::size_t>{7, 7, 0}), 7u);
  EXPECT_EQ(majority_vote(std::vector<std::size_t>{6}), 6u);
}

TEST(Report, RandomPredictionsStayConsistent) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ChunkPrediction> preds;
    std::map<std::string, std::vector<std::size_t>> votes;
    std::map<std::string, std::size_t> truth;
    const std::size_t n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t label = rng() % 8, video = rng() % 10;
      const std::string src = "v" + std::to_string(video) + "_" + std::to_string(label);
      const std::size_t pred = rng() % 3 == 0 ? rng() % 8 : label;
      preds.push_back({src, label, pred, 1.0});
      votes[src].push_back(pred);
      truth[src] = label;
    }
    const auto r = build_report(preds);
    std::array<std::size_t, 8> per_class{};
    for (const auto& p : preds) ++per_class[p.label];
    std::size_t trace = 0, sum = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      std::size_t row = 0;
      for (auto c : r.chunk_level.confusion[i]) row += c;
      EXPECT_EQ(row, per_class[i]);
      EXPECT_EQ(r.chunk_level.per_class[i].has_value(), per_class[i] > 0);
      trace += r.chunk_level.confusion[i][i];
      sum += row;
    }
    EXPECT_DOUBLE_EQ(r.chunk_level.total, 100.0 * trace / sum);
    std::size_t right = 0;
    for (const auto& [src, v] : votes) {
      std::array<std::size_t, 8> count{};
      for (auto p : v) ++count[p];
      std::size_t best = 0;
      for (std::size_t k = 1; k < 8; ++k)
        if (count[k] > count[best]) best = k;
      right += best == truth[src];
    }
    EXPECT_DOUBLE_EQ(r.video_level.total, 100.0 * right / votes.size());
  }
}

TEST(Heatmap, UniformMapIsFlatGray) {
  const auto img = alpha_heatmap(Tensor<double>::filled({3, 3}, 1.0 / 9), 12);
  EXPECT_EQ(img.width, 12u);
  EXPECT_EQ(img.channels, 1u);
  for (auto v : img.pixels) EXPECT_EQ(v, 128);
  const auto peaked = alpha_heatmap(Tensor<double>({2, 2}, {0.1, 0.2, 0.3, 0.4}), 4);
  EXPECT_EQ(peaked.at(0, 0, 0), 0);
  EXPECT_EQ(peaked.at(3, 3, 0), 255);
  EXPECT_EQ(peaked.at(2, 0, 0), 85);
  const auto cell = cell_of(6, 6, 10, 10, 16, 4);
  EXPECT_EQ(cell.row, 2u);
  EXPECT_EQ(cell.col, 2u);
}

TEST(ExportAttention, FilesAndNormalisation) {
  TempDir dir("export");
  const auto model = load_model<float>(save_random_model(dir.path(), 3));
  auto cfg = model.config;
  auto seq = render_sequence(TaillightState::parse("OLO"), cfg.data.scene, cfg.data.sequence_length, 3);
  for (auto& f : seq.frames) f = resize_bilinear(f, cfg.model.backbone.input_side, cfg.model.backbone.input_side);
  const auto chunk = chunk_at(seq, 0, cfg.chunk);
  const auto trace = trace_attention(model, chunk);
  export_attention(dir / "attn", trace, cfg.model.backbone.input_side);
  const auto beta = read_csv_numbers(dir / "attn" / "beta.csv");
  ASSERT_EQ(beta.size(), cfg.chunk.window);
  double last = 0;
  for (double v : beta.back()) last += v;
  EXPECT_NEAR(last, 1.0, 1e-6);
  for (std::size_t t = 0; t < cfg.chunk.window; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "alpha_%02zu.pgm", t);
    EXPECT_EQ(read_pgm(dir / "attn" / name).width, cfg.model.backbone.input_side);
  }
  EXPECT_EQ(read_csv_numbers(dir / "attn" / "alpha_stats.csv").size(), cfg.chunk.window);
  EXPECT_TRUE(fs::exists(dir / "attn" / "logits.csv"));

  // stage 1 models bypass spatial attention: every heat map is flat gray
  const auto flat = load_model<float>(save_random_model(dir.path(), 1));
  const auto t1 = trace_attention(flat, chunk);
  for (const auto& a : t1.alpha)
    for (auto v : alpha_heatmap(a, 8).pixels) EXPECT_EQ(v, 128);
}

TEST(Inference, RepeatedRunsAreBitIdentical) {
  TempDir dir("infer");
  const auto path = save_random_model(dir.path(), 3);
  const auto a = load_model<float>(path), b = load_model<float>(path);
  const auto& cfg = a.config;
  auto seq = render_sequence(TaillightState::parse("BLR"), cfg.data.scene, cfg.data.sequence_length, 9);
  for (auto& f : seq.frames) f = resize_bilinear(f, cfg.model.backbone.input_side, cfg.model.backbone.input_side);
  const auto chunk = chunk_at(seq, 0, cfg.chunk);
  const auto ta = trace_attention(a, chunk), tb = trace_attention(b, chunk);
  ASSERT_EQ(ta.logits.size(), tb.logits.size());
  for (std::size_t i = 0; i < ta.logits.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(ta.logits[i]), std::bit_cast<std::uint32_t>(tb.logits[i]));
  EXPECT_EQ(ta.predicted, tb.predicted);
}

TEST(Evaluate, WritesReportFiles) {
  TempDir dir("evaluate");
  auto cfg = Config::load(std::string(TAILLIGHT_CONFIG_DIR) + "/tiny.cfg");
  generate_dataset(dir / "data", cfg.data);
  const auto model = load_model<float>(save_random_model(dir.path(), 2));
  const auto report = evaluate(model, dir / "data", Split::kTest);
  EXPECT_EQ(report.video_level.samples, 8u);
  write_eval_report(dir / "out", "T", report);
  std::ifstream in(dir / "out" / "report.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header + "\n", table_header());
  EXPECT_TRUE(fs::exists(dir / "out" / "confusion.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "video_confusion.csv"));
}
