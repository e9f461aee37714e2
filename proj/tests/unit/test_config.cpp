#include <gtest/gtest.h>

#include "taillight/config.hpp"
#include "taillight/error.hpp"

using namespace taillight;

TEST(Config, ParsesKeysCommentsAndLists) {
  const auto c = Config::parse(
      "# comment\n"
      "input_side = 32\n"
      "stage_channels = 8, 16, 16\n"
      "split_l = 2   # trailing\n"
      "\n"
      "learning_rate = 0.003\n"
      "epochs = 3,2,1\n"
      "loss_mode = soft_bootstrap\n"
      "align_mode = identity\n"
      "train_counts = 1,2,3,4,5,6,7,8\n"
      "augment = false\n"
      "window = 8\n"
      "blink_period = 8\n");
  EXPECT_EQ(c.model.backbone.input_side, 32u);
  EXPECT_EQ(c.model.backbone.stage_channels, (std::vector<std::size_t>{8, 16, 16}));
  EXPECT_EQ(c.model.backbone.split_l, 2u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.003);
  EXPECT_EQ(c.train.epochs, (std::array<std::size_t, 3>{3, 2, 1}));
  EXPECT_EQ(c.train.loss_mode, LossMode::kSoftBootstrap);
  EXPECT_EQ(c.chunk.align, AlignMode::kIdentity);
  EXPECT_EQ(c.data.train_counts, (ClassCounts{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_FALSE(c.augment);
  EXPECT_EQ(c.data.scene.window, 8u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(Config::parse("learning_rat = 0.1\n"), ConfigError);
  EXPECT_THROW(Config::parse("learning_rate = fast\n"), ConfigError);
  EXPECT_THROW(Config::parse("epochs = 1,2\n"), ConfigError);
  EXPECT_THROW(Config::parse("just words\n"), ConfigError);
  EXPECT_THROW(Config::parse("split_l = 9\n"), ConfigError);
  EXPECT_THROW(Config::parse("bootstrap_ratio = 0\n"), ConfigError);
  EXPECT_THROW(Config::parse("blink_period = 20\n"), ConfigError);
  EXPECT_THROW(Config::load("/nonexistent/x.cfg"), ConfigError);
  try {
    Config::parse("a = 1\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
}

TEST(Config, TextRoundTrip) {
  auto c = Config::parse("learning_rate = 0.0123456789\nmomentum = 0.5\nseed = 77\ndistractor_prob = 0.25\n");
  const auto again = Config::parse(c.to_text());
  EXPECT_EQ(again.to_text(), c.to_text());
  EXPECT_EQ(again.train.learning_rate, 0.0123456789);
  EXPECT_EQ(again.train.seed, 77u);
  EXPECT_EQ(again.data.scene.distractor_prob, 0.25);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"default.cfg", "benchmark.cfg", "tiny.cfg"}) {
    EXPECT_NO_THROW(Config::load(std::string(TAILLIGHT_CONFIG_DIR) + "/" + name)) << name;
  }
  const auto d = Config::load(std::string(TAILLIGHT_CONFIG_DIR) + "/default.cfg");
  EXPECT_EQ(d.chunk.window, 16u);
  EXPECT_EQ(d.train.batch_size, 32u);
  EXPECT_DOUBLE_EQ(d.train.bootstrap_ratio, 0.3);
  EXPECT_DOUBLE_EQ(d.train.momentum, 0.9);
}
