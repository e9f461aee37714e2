#include "taillight/eval/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "taillight/attention/temporal.hpp"
#include "taillight/error.hpp"
#include "taillight/synth/netpbm.hpp"
#include "taillight/training/data.hpp"
#include "taillight/training/trainer.hpp"

namespace fs = std::filesystem;

namespace taillight {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

template <typename T>
LoadedModel<T> load_model(const fs::path& checkpoint) {
  auto ck = load_checkpoint<T>(checkpoint);
  Config config = Config::parse(ck.config_text, checkpoint.string());
  TaillightNet<T> net(config.model);
  return {std::move(config), ck.stage, std::move(net), std::move(ck.params)};
}

template <typename T>
EvalReport evaluate(const LoadedModel<T>& model, const fs::path& dataset, Split split) {
  DatasetReader reader(dataset);
  const ChunkSource source = load_chunks(reader, split, model.config);
  if (source.size() == 0) throw DataError(std::string("no ") + split_name(split) + " chunks in " + dataset.string());
  const auto preds = predict_chunks<T>(model.net, model.params, model.switches(), source);
  return build_report(preds);
}

void write_eval_report(const fs::path& out_dir, const std::string& method, const EvalReport& report) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_text(out_dir / "report.csv", table_header() + table_row(method + " (chunk)", report.chunk_level) +
                                         table_row(method + " (video)", report.video_level));
  write_text(out_dir / "confusion.csv", confusion_csv(report.chunk_level.confusion));
  write_text(out_dir / "video_confusion.csv", confusion_csv(report.video_level.confusion));
}

template <typename T>
std::string ablation_report(const fs::path& run_dir, const fs::path& dataset, Split split) {
  static const char* names[] = {"none", "T", "S+T"};
  std::string out = table_header();
  for (int stage = 1; stage <= 3; ++stage) {
    const auto path = stage_checkpoint_path(run_dir, stage);
    if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string());
    const auto report = evaluate(load_model<T>(path), dataset, split);
    out += table_row(names[stage - 1], report.chunk_level);
  }
  return out;
}

template <typename T>
AttentionTrace<T> trace_attention(const LoadedModel<T>& model, const Chunk& chunk) {
  ParamView<T> view(model.params);
  auto r = model.net.forward(view, chunk_tensor<T>(chunk), model.switches());
  AttentionTrace<T> t;
  t.alpha = std::move(r.alpha);
  t.beta = r.beta;
  t.logits = r.logits;
  t.predicted = argmax_class<T>(r.last_logits().values());
  return t;
}

template <typename T>
Image alpha_heatmap(const Tensor<T>& alpha, std::size_t side) {
  if (alpha.rank() != 2) throw ShapeError("alpha map must be [H,W]");
  const std::size_t gh = alpha.dim(0), gw = alpha.dim(1);
  const auto [lo, hi] = std::minmax_element(alpha.values().begin(), alpha.values().end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  Image img(side, side, 1);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const T a = alpha[(y * gh / side) * gw + x * gw / side];
      img.at(x, y, 0) = range > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (a - *lo) / range)) : 128;
    }
  return img;
}

template <typename T>
void export_attention(const fs::path& out_dir, const AttentionTrace<T>& trace, std::size_t side) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string());
  std::string raw = "t,row,col,alpha\n", stats = "t,max_weight,argmax_row,argmax_col\n";
  for (std::size_t t = 0; t < trace.alpha.size(); ++t) {
    const auto& a = trace.alpha[t];
    char name[32];
    std::snprintf(name, sizeof name, "alpha_%02zu.pgm", t);
    write_pgm(out_dir / name, alpha_heatmap(a, side));
    std::size_t best = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      raw += std::to_string(t) + "," + std::to_string(i / a.dim(1)) + "," + std::to_string(i % a.dim(1)) + "," +
             num(static_cast<double>(a[i])) + "\n";
      if (a[i] > a[best]) best = i;
    }
    stats += std::to_string(t) + "," + num(static_cast<double>(a[best])) + "," + std::to_string(best / a.dim(1)) +
             "," + std::to_string(best % a.dim(1)) + "\n";
  }
  write_text(out_dir / "alpha_raw.csv", raw);
  write_text(out_dir / "alpha_stats.csv", stats);

  auto matrix_csv = [](const Tensor<T>& m, const std::vector<std::string>& columns) {
    std::string s = "t";
    for (const auto& c : columns) s += "," + c;
    s += "\n";
    for (std::size_t i = 0; i < m.dim(0); ++i) {
      s += std::to_string(i);
      for (std::size_t j = 0; j < m.dim(1); ++j) s += "," + num(static_cast<double>(m[i * m.dim(1) + j]));
      s += "\n";
    }
    return s;
  };
  std::vector<std::string> steps;
  for (std::size_t j = 0; j < trace.beta.dim(1); ++j) steps.push_back("s" + std::to_string(j));
  write_text(out_dir / "beta.csv", matrix_csv(trace.beta, steps));
  write_text(out_dir / "logits.csv", matrix_csv(trace.logits, {kClassCodes.begin(), kClassCodes.end()}));
  write_text(out_dir / "prediction.txt", std::string(kClassCodes[trace.predicted]) + "\n");
}

GridCell cell_of(std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1, std::size_t frame_side,
                 std::size_t grid_side) {
  const double cx = 0.5 * static_cast<double>(x0 + x1), cy = 0.5 * static_cast<double>(y0 + y1);
  auto cell = [&](double c) {
    return std::min(grid_side - 1, static_cast<std::size_t>(c * static_cast<double>(grid_side) / frame_side));
  };
  return {cell(cy), cell(cx)};
}

FrameSequence read_sequence_dir(const fs::path& dir, TaillightState label) {
  if (!fs::is_directory(dir)) throw DataError("not a sequence directory: " + dir.string());
  FrameSequence seq;
  seq.source_id = dir.filename().string();
  seq.label = label;
  for (std::size_t t = 0;; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.ppm", t);
    const fs::path f = dir / name;
    if (!fs::exists(f)) break;
    seq.frames.push_back(read_ppm(f));
  }
  if (seq.frames.empty()) throw DataError("no frame_####.ppm files in " + dir.string());
  return seq;
}

#define TAILLIGHT_INSTANTIATE_EVAL(T)                                                            \
  template LoadedModel<T> load_model<T>(const fs::path&);                                        \
  template EvalReport evaluate<T>(const LoadedModel<T>&, const fs::path&, Split);                \
  template std::string ablation_report<T>(const fs::path&, const fs::path&, Split);              \
  template AttentionTrace<T> trace_attention<T>(const LoadedModel<T>&, const Chunk&);            \
  template Image alpha_heatmap<T>(const Tensor<T>&, std::size_t);                                \
  template void export_attention<T>(const fs::path&, const AttentionTrace<T>&, std::size_t);

TAILLIGHT_INSTANTIATE_EVAL(float)
TAILLIGHT_INSTANTIATE_EVAL(double)

}  // namespace taillight
