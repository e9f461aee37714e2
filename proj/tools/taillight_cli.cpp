#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "taillight/config.hpp"
#include "taillight/error.hpp"
#include "taillight/eval/evaluate.hpp"
#include "taillight/gradcheck/gradcheck.hpp"
#include "taillight/log.hpp"
#include "taillight/synth/dataset.hpp"
#include "taillight/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace taillight;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> split_l;
};

Config make_config(const Common& c, bool seed_is_data) {
  Config cfg = c.config_path.empty() ? Config() : Config::load(c.config_path);
  if (c.seed) (seed_is_data ? cfg.data.seed : cfg.train.seed) = *c.seed;
  if (c.split_l) cfg.model.backbone.split_l = *c.split_l;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

template <typename F>
auto with_precision(Precision p, F&& f) {
  if (p == Precision::kTest) return f(double{});
  return f(float{});
}

Precision checkpoint_precision(const fs::path& ckpt) {
  return Config::parse(peek_checkpoint(ckpt).config_text, ckpt.string()).train.precision;
}

void print_report(const EvalReport& r) {
  std::cout << table_header() << table_row("chunk", r.chunk_level) << table_row("video", r.video_level);
  std::printf("chunks %zu, videos %zu, mean loss %.6f\n", r.chunk_level.samples, r.video_level.samples, r.mean_loss);
}

// Which attention cell holds each lamp, for frames drawn by the generator.
void log_region_diagnostic(const Config& cfg, const AttentionTrace<double>& trace) {
  SceneParams scene = cfg.data.scene;
  scene.image_side = cfg.model.backbone.input_side;
  const auto lay = scene_layout(scene);
  const std::size_t grid = cfg.model.backbone.split_grid();
  const auto left = cell_of(lay.left_lamp.x0, lay.left_lamp.y0, lay.left_lamp.x1, lay.left_lamp.y1, scene.image_side, grid);
  const auto right =
      cell_of(lay.right_lamp.x0, lay.right_lamp.y0, lay.right_lamp.x1, lay.right_lamp.y1, scene.image_side, grid);
  std::size_t in_left = 0, in_right = 0;
  for (const auto& a : trace.alpha) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > a[best]) best = i;
    const GridCell c{best / grid, best % grid};
    in_left += c.row == left.row && c.col == left.col;
    in_right += c.row == right.row && c.col == right.col;
  }
  log_info("attention peak on the left-lamp cell (" + std::to_string(left.row) + "," + std::to_string(left.col) +
           ") in " + std::to_string(in_left) + "/" + std::to_string(trace.alpha.size()) +
           " steps, right-lamp cell (" + std::to_string(right.row) + "," + std::to_string(right.col) + ") in " +
           std::to_string(in_right));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle taillight state recognition with spatial and temporal attention"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the seed");
    sub->add_option("--split-l", common.split_l, "backbone stage feeding spatial attention");
  };

  std::string dataset, out, checkpoint, input, split = "test";
  std::optional<int> stage;
  std::size_t start = 0;

  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset");
  add_common(gen);
  gen->add_option("--dataset,--out", dataset, "dataset root to write")->required();

  auto* train = app.add_subcommand("train", "progressive training, stages 1 to 3");
  add_common(train);
  train->add_option("--dataset", dataset, "dataset root")->required();
  train->add_option("--out", out, "run directory for checkpoints and metrics")->required();
  train->add_option("--stage", stage, "run only this stage (needs the previous stage's checkpoint)")
      ->check(CLI::Range(1, 3));

  auto* eval = app.add_subcommand("eval", "accuracy report for a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "dataset root")->required();
  eval->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--out", out, "directory for report.csv and confusion matrices");

  auto* report = app.add_subcommand("report", "none / T / S+T comparison from a run directory");
  add_common(report);
  report->add_option("--run", out, "run directory holding stage1..3 checkpoints")->required();
  report->add_option("--dataset", dataset, "dataset root")->required();
  report->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

  auto* infer = app.add_subcommand("infer", "classify the chunks of one sequence");
  add_common(infer);
  infer->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  infer->add_option("--input", input, "sequence directory of frame_####.ppm")->required();

  auto* exp = app.add_subcommand("export-attn", "write attention maps for one chunk");
  add_common(exp);
  exp->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exp->add_option("--input", input, "sequence directory of frame_####.ppm")->required();
  exp->add_option("--start", start, "first frame of the chunk");
  exp->add_option("--out", out, "output directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(grad);

  auto* layers = app.add_subcommand("ablate-layers", "train and evaluate every valid split layer");
  add_common(layers);
  layers->add_option("--dataset", dataset, "dataset root")->required();
  layers->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*gen) {
      const Config cfg = make_config(common, true);
      const auto manifest = generate_dataset(dataset, cfg.data);
      const std::string table = distribution_table(manifest);
      write_file(fs::path(dataset) / "distribution.csv", table);
      std::cout << table;
      return kOk;
    }
    if (*train) {
      const Config cfg = make_config(common, false);
      ProgressiveOptions opt{dataset, out, stage.value_or(1), stage.value_or(3), &std::cout};
      fs::create_directories(out);
      write_file(fs::path(out) / "config.cfg", cfg.to_text());
      with_precision(cfg.train.precision, [&](auto tag) {
        using T = decltype(tag);
        train_progressive<T>(cfg, opt);
        return 0;
      });
      return kOk;
    }
    if (*eval) {
      with_precision(checkpoint_precision(checkpoint), [&](auto tag) {
        using T = decltype(tag);
        const auto model = load_model<T>(checkpoint);
        const auto r = evaluate(model, dataset, parse_split(split));
        print_report(r);
        if (!out.empty()) write_eval_report(out, "stage" + std::to_string(model.stage), r);
        return 0;
      });
      return kOk;
    }
    if (*report) {
      const std::string table = with_precision(checkpoint_precision(stage_checkpoint_path(out, 1)), [&](auto tag) {
        return ablation_report<decltype(tag)>(out, dataset, parse_split(split));
      });
      write_file(fs::path(out) / "ablation.csv", table);
      std::cout << table;
      return kOk;
    }
    if (*infer) {
      const auto model = load_model<double>(checkpoint);
      const auto seq = read_sequence_dir(input);
      ChunkSource source({seq}, model.config.chunk, model.config.model.backbone.input_side);
      if (source.size() == 0) throw DataError("sequence " + input + " is shorter than one chunk");
      std::vector<std::size_t> votes;
      for (std::size_t i = 0; i < source.size(); ++i) {
        const auto trace = trace_attention(model, source.chunk(i));
        votes.push_back(trace.predicted);
        std::printf("chunk %zu start %zu -> %s  logits", i, source.ref(i).start,
                    std::string(kClassCodes[trace.predicted]).c_str());
        const std::size_t last = trace.logits.dim(0) - 1;
        for (std::size_t k = 0; k < kNumClasses; ++k) std::printf(" %.6f", trace.logits[last * kNumClasses + k]);
        std::printf("\n");
      }
      std::printf("sequence -> %s\n", std::string(kClassCodes[majority_vote(votes)]).c_str());
      return kOk;
    }
    if (*exp) {
      const auto model = load_model<double>(checkpoint);
      const auto seq = read_sequence_dir(input);
      ChunkSource source({seq}, model.config.chunk, model.config.model.backbone.input_side);
      std::size_t idx = source.size();
      for (std::size_t i = 0; i < source.size(); ++i)
        if (source.ref(i).start == start) idx = i;
      if (idx == source.size()) throw DataError("no chunk starts at frame " + std::to_string(start));
      const auto trace = trace_attention(model, source.chunk(idx));
      export_attention(out, trace, model.config.model.backbone.input_side);
      log_region_diagnostic(model.config, trace);
      std::printf("%s\n", std::string(kClassCodes[trace.predicted]).c_str());
      return kOk;
    }
    if (*grad) {
      const Config cfg = make_config(common, false);
      bool ok = true;
      for (const auto& r : gradient_suite(cfg.gradcheck, cfg.model)) {
        const bool pass = r.passed(cfg.gradcheck.tolerance);
        ok = ok && pass;
        std::printf("%-20s %s  probes %zu  max rel err %.3e  resampled %zu\n", r.name.c_str(), pass ? "ok  " : "FAIL",
                    r.probes.size(), r.max_rel_error, r.resampled);
      }
      return ok ? kOk : kNumeric;
    }
    if (*layers) {
      Config cfg = make_config(common, false);
      std::string rows = "split_l,grid,chunk_accuracy,video_accuracy\n";
      for (std::size_t l : cfg.model.backbone.valid_splits()) {
        Config c = cfg;
        c.model.backbone.split_l = l;
        c.validate();
        const fs::path run = fs::path(out) / ("split_l" + std::to_string(l));
        fs::remove(run / "metrics.csv");
        const std::string row = with_precision(c.train.precision, [&](auto tag) {
          using T = decltype(tag);
          train_progressive<T>(c, {dataset, run, 1, 3, &std::cout});
          const auto r = evaluate(load_model<T>(stage_checkpoint_path(run, 3)), dataset, Split::kTest);
          char buf[96];
          std::snprintf(buf, sizeof buf, "%zu,%zu,%.4f,%.4f\n", l, c.model.backbone.grid_side(l),
                        r.chunk_level.total, r.video_level.total);
          return std::string(buf);
        });
        rows += row;
        std::cout << row;
      }
      fs::create_directories(out);
      write_file(fs::path(out) / "layer_ablation.csv", rows);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
