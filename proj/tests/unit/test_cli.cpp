#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

using taillight::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const std::string kTiny = std::string(TAILLIGHT_CONFIG_DIR) + "/tiny.cfg";

struct Run {
  int code;
  std::string err;
};

Run cli(const std::string& args, const TempDir& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(TAILLIGHT_CLI) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("cli_usage");
  auto r = cli("eval --dataset " + dir.path().string(), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--checkpoint"), std::string::npos) << r.err;
  r = cli("train --bogus-flag 3", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_EQ(cli("", dir).code, 1);
}

TEST(Cli, MissingPriorStageExitsTwo) {
  TempDir dir("cli_stage");
  ASSERT_EQ(cli("gen-data --config " + kTiny + " --out " + (dir / "data").string(), dir).code, 0);
  const auto r = cli("train --config " + kTiny + " --dataset " + (dir / "data").string() + " --out " +
                         (dir / "run").string() + " --stage 2",
                     dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("stage1.ckpt"), std::string::npos) << r.err;
  EXPECT_EQ(cli("eval --checkpoint " + (dir / "none.ckpt").string() + " --dataset " + (dir / "data").string(), dir).code, 2);
}

TEST(Cli, GradcheckOnTinyConfigPasses) {
  TempDir dir("cli_grad");
  const auto r = cli("gradcheck --config " + kTiny, dir);
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, EndToEndOnTinyData) {
  TempDir dir("cli_e2e");
  const auto data = (dir / "data").string(), run = (dir / "run").string();
  ASSERT_EQ(cli("gen-data --config " + kTiny + " --out " + data, dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "distribution.csv"));
  ASSERT_EQ(cli("train --config " + kTiny + " --dataset " + data + " --out " + run, dir).code, 0);
  for (int s = 1; s <= 3; ++s) EXPECT_TRUE(fs::exists(dir / "run" / ("stage" + std::to_string(s) + ".ckpt")));
  const auto ck = (dir / "run" / "stage3.ckpt").string();
  EXPECT_EQ(cli("eval --checkpoint " + ck + " --dataset " + data + " --out " + (dir / "eval").string(), dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.csv"));
  EXPECT_EQ(cli("report --run " + run + " --dataset " + data, dir).code, 0);
  const auto seq = (dir / "data" / "test" / "OLO" / "seq_0000").string();
  EXPECT_EQ(cli("infer --checkpoint " + ck + " --input " + seq, dir).code, 0);
  EXPECT_EQ(cli("export-attn --checkpoint " + ck + " --input " + seq + " --out " + (dir / "attn").string(), dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "attn" / "beta.csv"));
}
