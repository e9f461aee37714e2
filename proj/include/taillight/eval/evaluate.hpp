#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taillight/config.hpp"
#include "taillight/eval/report.hpp"
#include "taillight/model/taillight_net.hpp"
#include "taillight/preprocess/chunk.hpp"
#include "taillight/training/checkpoint.hpp"

namespace taillight {

// A checkpoint ready for inference: its config, stage switches and weights.
template <typename T>
struct LoadedModel {
  Config config;
  int stage = 1;
  TaillightNet<T> net;
  ParamStore<T> params;

  AttentionSwitches switches() const { return AttentionSwitches::for_stage(stage); }
};

template <typename T>
LoadedModel<T> load_model(const std::filesystem::path& checkpoint);

template <typename T>
EvalReport evaluate(const LoadedModel<T>& model, const std::filesystem::path& dataset, Split split);

// Writes report.csv (chunk and video rows), confusion.csv and video_confusion.csv.
void write_eval_report(const std::filesystem::path& out_dir, const std::string& method, const EvalReport& report);

// Rows none / T / S+T from stage{1,2,3}.ckpt under `run_dir`.
template <typename T>
std::string ablation_report(const std::filesystem::path& run_dir, const std::filesystem::path& dataset, Split split);

template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> alpha;  // per step [H_l, W_l]
  Tensor<T> beta;                // [T, T]
  Tensor<T> logits;              // [T, 8]
  std::size_t predicted = 0;
};

template <typename T>
AttentionTrace<T> trace_attention(const LoadedModel<T>& model, const Chunk& chunk);

// Per-step min-max normalised to 0..255, constant maps become 128, then
// nearest-neighbour upscaled to side x side.
template <typename T>
Image alpha_heatmap(const Tensor<T>& alpha, std::size_t side);

// alpha_##.pgm per step, alpha_raw.csv, alpha_stats.csv, beta.csv, logits.csv.
template <typename T>
void export_attention(const std::filesystem::path& out_dir, const AttentionTrace<T>& trace, std::size_t side);

struct GridCell {
  std::size_t row = 0, col = 0;
};
// Grid cell of the attention map containing the centre of a pixel rectangle
// given in frame coordinates.
GridCell cell_of(std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1, std::size_t frame_side,
                 std::size_t grid_side);

// Loads frame_####.ppm files from a sequence directory in index order.
FrameSequence read_sequence_dir(const std::filesystem::path& dir, TaillightState label = {});

}  // namespace taillight
