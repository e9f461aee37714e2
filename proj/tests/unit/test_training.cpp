#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "helpers.hpp"
#include "taillight/autodiff/ops.hpp"
#include "taillight/config.hpp"
#include "taillight/error.hpp"
#include "taillight/synth/scene.hpp"
#include "taillight/training/checkpoint.hpp"
#include "taillight/training/data.hpp"
#include "taillight/training/loss.hpp"
#include "taillight/training/optimizer.hpp"
#include "taillight/training/trainer.hpp"

using namespace taillight;
using taillight::testing::random_tensor;
using taillight::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Config tiny_config() { return Config::load(std::string(TAILLIGHT_CONFIG_DIR) + "/tiny.cfg"); }

ChunkSource tiny_source(const Config& c, std::size_t per_class, std::uint64_t seed) {
  std::vector<FrameSequence> seqs;
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t i = 0; i < per_class; ++i) {
      auto s = render_sequence(TaillightState::from_index(k), c.data.scene, c.data.sequence_length, seed + 10 * k + i);
      s.source_id = "s" + std::to_string(k) + "_" + std::to_string(i);
      seqs.push_back(std::move(s));
    }
  return ChunkSource(std::move(seqs), c.chunk, c.model.backbone.input_side);
}

void expect_same(const ParamStore<double>& a, const ParamStore<double>& b, const std::string& what) {
  ASSERT_EQ(a.size(), b.size()) << what;
  for (const auto& [name, t] : a.all()) {
    const auto& u = b.get(name);
    ASSERT_EQ(t.shape(), u.shape()) << what << " " << name;
    for (std::size_t i = 0; i < t.size(); ++i) ASSERT_EQ(t[i], u[i]) << what << " " << name << "[" << i << "]";
  }
}

}  // namespace

TEST(ChunkLoss, LimitsAndClosedForm) {
  std::vector<double> big(8, 0.0);
  big[3] = 60;
  EXPECT_LT(chunk_loss(Tensor<double>({8}, big), TaillightState::from_index(3)).item(), 1e-20);
  EXPECT_NEAR(chunk_loss(Tensor<double>::zeros({8}), TaillightState::from_index(5)).item(), std::log(8.0), 1e-15);
  EXPECT_NEAR(std::log(8.0), 2.0794, 1e-4);
}

TEST(ChunkLoss, MatchesNegativeLogSoftmax) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto z = random_tensor({8}, seed, -6, 6);
    const std::size_t y = seed % 8;
    double denom = 0;
    for (double v : z.values()) denom += std::exp(v);
    EXPECT_NEAR(chunk_loss(z, TaillightState::from_index(y)).item(), -std::log(std::exp(z[y]) / denom), 1e-10);
  }
}

TEST(BootstrappedLoss, WorkedExampleAndMeanBound) {
  const std::vector<double> losses{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(bootstrap_count(10, 0.3), 3u);
  EXPECT_EQ(bootstrapped_batch_loss<double>(losses, 0.3), 9.0);
  EXPECT_EQ(bootstrapped_batch_loss<double>(losses, 1.0), 5.5);
  EXPECT_THROW(bootstrapped_batch_loss<double>(std::vector<double>{}, 0.3), DataError);
  EXPECT_THROW(bootstrap_count(4, 0.0), ConfigError);
  EXPECT_EQ(bootstrap_count(2, 0.1), 1u);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = static_cast<double>(rng() % 1000) / 64;
    const double r = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 999;
    auto sorted = v;
    std::sort(sorted.rbegin(), sorted.rend());
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(r * v.size() - 1e-9)));
    double oracle = 0;
    for (std::size_t i = 0; i < k; ++i) oracle += sorted[i];
    oracle /= static_cast<double>(k);
    const double got = bootstrapped_batch_loss<double>(v, r);
    EXPECT_EQ(got, oracle);
    EXPECT_GE(got, std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()) - 1e-12);
  }
}

TEST(BootstrapTarget, BlendsLabelWithPrediction) {
  const auto z = random_tensor({8}, 3, -2, 2);
  const auto label = TaillightState::from_index(2);
  const auto soft = bootstrap_target<double>(z.values(), label, 0.25, LossMode::kSoftBootstrap);
  const auto hard = bootstrap_target<double>(z.values(), label, 0.25, LossMode::kHardBootstrap);
  EXPECT_NEAR(std::accumulate(soft.begin(), soft.end(), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(std::accumulate(hard.begin(), hard.end(), 0.0), 1.0, 1e-15);
  const std::size_t top = argmax_class<double>(z.values());
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_GE(soft[k], 0.0);
    const double h = 0.75 * (k == 2) + 0.25 * (k == top);
    EXPECT_NEAR(hard[k], h, 1e-15);
  }
}

TEST(Sgd, MomentumRecurrence) {
  ParamStore<double> p;
  p.set("head.w", Tensor<double>({2}, {1.0, -2.0}));
  GradMap<double> g{{"head.w", Tensor<double>({2}, {0.5, 0.25})}};

  SgdMomentum<double> plain(0.1, 0.0);
  auto q = p;
  plain.step(q, g);
  EXPECT_DOUBLE_EQ(q.get("head.w")[0], 1.0 - 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(q.get("head.w")[1], -2.0 - 0.1 * 0.25);

  SgdMomentum<double> heavy(1.0, 0.9);
  q = p;
  heavy.step(q, g);
  heavy.step(q, g);
  EXPECT_DOUBLE_EQ(q.get("head.w")[0], 1.0 - 0.5 * 2.9);
  EXPECT_DOUBLE_EQ(q.get("head.w")[1], -2.0 - 0.25 * 2.9);

  SgdMomentum<double> frozen(0.0, 0.9);
  q = p;
  frozen.step(q, g);
  frozen.step(q, g);
  EXPECT_EQ(q.get("head.w")[0], 1.0);

  SgdMomentum<double> filtered(1.0, 0.0);
  q = p;
  filtered.step(q, g, [](const std::string&) { return false; });
  EXPECT_EQ(q.get("head.w")[0], 1.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir("ckpt");
  TaillightNet<double> net(tiny_config().model);
  Checkpoint<double> ck;
  ck.stage = 2;
  ck.config_text = tiny_config().to_text();
  ck.params = net.init(5);
  ck.params.set("head.b_p", Tensor<double>({8}, {0.1, -0.0, 1e-300, -1e300, 3.5, 0, 1.0 / 3, -7}));
  ck.momentum["head.b_p"] = random_tensor({8}, 6);
  ck.rng_state = "12345 678";
  save_checkpoint(dir / "a.ckpt", ck);
  const auto back = load_checkpoint<double>(dir / "a.ckpt");
  EXPECT_EQ(back.stage, 2);
  EXPECT_EQ(back.config_text, ck.config_text);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  expect_same(ck.params, back.params, "params");
  ASSERT_EQ(back.momentum.size(), 1u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.params.get("head.b_p")[i]),
              std::bit_cast<std::uint64_t>(ck.params.get("head.b_p")[i]));
    EXPECT_EQ(back.momentum.at("head.b_p")[i], ck.momentum.at("head.b_p")[i]);
  }
  const auto info = peek_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(info.stage, 2);
  EXPECT_EQ(info.stored, Precision::kTest);

  // float copy of the same parameters
  const auto narrow = load_checkpoint<float>(dir / "a.ckpt");
  EXPECT_EQ(narrow.params.get("head.b_p")[6], static_cast<float>(1.0 / 3));
}

TEST(Checkpoint, CorruptionAndTruncationAreDetected) {
  TempDir dir("ckpt_bad");
  Checkpoint<float> ck;
  ck.params.set("lstm.b_f", Tensor<float>::filled({4}, 1.0f));
  save_checkpoint(dir / "c.ckpt", ck);
  std::string bytes;
  {
    std::ifstream in(dir / "c.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(dir / "c.ckpt", std::ios::binary | std::ios::trunc);
    out << b;
  };
  auto message = [&] {
    try {
      load_checkpoint<float>(dir / "c.ckpt");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  write(flipped);
  EXPECT_NE(message().find("CRC"), std::string::npos) << message();
  write(bytes.substr(0, bytes.size() - 9));
  EXPECT_NE(message().find("checkpoint"), std::string::npos) << message();
  write("not a checkpoint at all");
  EXPECT_NE(message().find("not a checkpoint"), std::string::npos) << message();
  fs::remove(dir / "c.ckpt");
  EXPECT_THROW(load_checkpoint<float>(dir / "c.ckpt"), DataError);
}

TEST(StageEntry, LaterStagesCopyPriorAndDrawNewGroup) {
  Trainer<double> trainer(tiny_config());
  const auto s1 = trainer.stage_entry(1, nullptr);
  EXPECT_THROW(trainer.stage_entry(2, nullptr), DataError);
  Checkpoint<double> prior;
  prior.stage = 1;
  prior.params = s1;
  // make the prior distinguishable from a fresh init
  prior.params.set("lstm.b_i", random_tensor({tiny_config().model.hidden_size}, 9));
  const auto s2 = trainer.stage_entry(2, &prior);
  ParamStore<double> kept;
  for (const auto& [name, t] : s2.all())
    if (group_of(name) != ParamGroup::kTemporal) kept.set(name, t);
  ParamStore<double> expected;
  for (const auto& [name, t] : prior.params.all())
    if (group_of(name) != ParamGroup::kTemporal) expected.set(name, t);
  expect_same(expected, kept, "stage 2 entry");
  bool fresh = false;
  for (const auto& [name, t] : s2.all())
    if (group_of(name) == ParamGroup::kTemporal)
      for (std::size_t i = 0; i < t.size(); ++i) fresh |= t[i] != prior.params.get(name)[i];
  EXPECT_TRUE(fresh);
}

TEST(BatchGradients, TwoPassMatchesSingleGraphTopK) {
  auto cfg = tiny_config();
  const auto src = tiny_source(cfg, 1, 100);
  TaillightNet<double> net(cfg.model);
  const auto params = net.init(3);
  std::vector<Tensor<double>> inputs;
  std::vector<TaillightState> labels;
  for (std::size_t i = 0; i < 7; ++i) {
    const auto c = src.chunk(i * 3 % src.size());
    inputs.push_back(chunk_tensor<double>(c));
    labels.push_back(c.label);
  }
  for (int stage = 1; stage <= 3; ++stage) {
    const auto sw = AttentionSwitches::for_stage(stage);
    const auto two_pass = batch_gradients<double>(net, params, sw, inputs, labels, cfg.train);

    Tape<double> tape;
    ParamView<double> view(params, &tape);
    std::vector<Tensor<double>> losses;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      losses.push_back(reshape(chunk_loss(net.forward(view, inputs[i], sw).last_logits(), labels[i]), Shape{1}));
    const auto k = bootstrap_count(inputs.size(), cfg.train.bootstrap_ratio);
    EXPECT_EQ(k, 3u);
    const auto total = mean_top_k(concat(losses, 0), k);
    const auto one_graph = tape.backward(total);

    EXPECT_NEAR(two_pass.loss, total.item(), 1e-13);
    EXPECT_EQ(two_pass.selected.size(), k);
    for (const auto& [name, g] : one_graph) {
      if (!sw.enables(group_of(name))) {
        EXPECT_FALSE(two_pass.grads.contains(name) && std::any_of(two_pass.grads.at(name).values().begin(),
                                                                   two_pass.grads.at(name).values().end(),
                                                                   [](double v) { return v != 0; }));
        continue;
      }
      ASSERT_TRUE(two_pass.grads.contains(name)) << name;
      const auto& h = two_pass.grads.at(name);
      for (std::size_t i = 0; i < g.size(); ++i)
        EXPECT_NEAR(h[i], g[i], 1e-12 * std::max(1.0, std::abs(g[i]))) << name << " stage " << stage;
    }
  }
}

TEST(BatchGradients, ChunkLossDoesNotDependOnBatchmates) {
  auto cfg = tiny_config();
  const auto src = tiny_source(cfg, 1, 200);
  TaillightNet<double> net(cfg.model);
  const auto params = net.init(4);
  std::vector<Tensor<double>> inputs;
  std::vector<TaillightState> labels;
  for (std::size_t i = 0; i < 5; ++i) {
    inputs.push_back(chunk_tensor<double>(src.chunk(i)));
    labels.push_back(src.label(i));
  }
  const auto batch = batch_gradients<double>(net, params, {true, true}, inputs, labels, cfg.train);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto alone = batch_gradients<double>(net, params, {true, true}, std::span(inputs).subspan(i, 1),
                                               std::span(labels).subspan(i, 1), cfg.train);
    EXPECT_EQ(alone.chunk_loss[0], batch.chunk_loss[i]);
  }
}

TEST(BatchGradients, LabelModesTapeEveryChunk) {
  auto cfg = tiny_config();
  cfg.train.loss_mode = LossMode::kSoftBootstrap;
  const auto src = tiny_source(cfg, 1, 300);
  TaillightNet<double> net(cfg.model);
  const auto params = net.init(5);
  std::vector<Tensor<double>> inputs{chunk_tensor<double>(src.chunk(0)), chunk_tensor<double>(src.chunk(1))};
  std::vector<TaillightState> labels{src.label(0), src.label(1)};
  const auto r = batch_gradients<double>(net, params, {false, false}, inputs, labels, cfg.train);
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Trainer, SameSeedSameFirstEpoch) {
  auto cfg = tiny_config();
  const auto src = tiny_source(cfg, 1, 400);
  auto first_loss = [&] {
    Trainer<float> t(cfg);
    double loss = -1;
    t.run_stage(1, t.stage_entry(1, nullptr), src, nullptr, [&](const EpochRecord& r) {
      if (r.epoch == 0 && r.split == "train") loss = r.loss;
    });
    return loss;
  };
  const double a = first_loss(), b = first_loss();
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(a), std::bit_cast<std::uint64_t>(b));
}

TEST(Trainer, ProgressiveRunWritesCheckpointsAndMetrics) {
  TempDir dir("progressive");
  auto cfg = tiny_config();
  generate_dataset(dir / "data", cfg.data);
  ProgressiveOptions opt{dir / "data", dir / "run", 2, 3, nullptr};
  EXPECT_THROW(train_progressive<float>(cfg, opt), DataError);
  opt.first_stage = 1;
  opt.last_stage = 1;
  const auto r1 = train_progressive<float>(cfg, opt);
  EXPECT_TRUE(fs::exists(stage_checkpoint_path(dir / "run", 1)));
  opt.first_stage = 2;
  opt.last_stage = 3;
  const auto r23 = train_progressive<float>(cfg, opt);
  EXPECT_TRUE(fs::exists(stage_checkpoint_path(dir / "run", 3)));
  EXPECT_EQ(load_checkpoint<float>(stage_checkpoint_path(dir / "run", 3)).stage, 3);

  std::ifstream in(dir / "run" / "metrics.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header + "\n", metrics_header());
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, r1.size() + r23.size());

  // stage 2 started from exactly what stage 1 saved
  const auto s1 = load_checkpoint<double>(stage_checkpoint_path(dir / "run", 1));
  Trainer<double> t(cfg);
  const auto s2_entry = t.stage_entry(2, &s1);
  for (const auto& [name, v] : s1.params.all()) {
    if (group_of(name) == ParamGroup::kTemporal) continue;
    const auto& w = s2_entry.get(name);
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(v[i], w[i]) << name;
  }
}
