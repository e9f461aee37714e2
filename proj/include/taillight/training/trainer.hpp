#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "taillight/config.hpp"
#include "taillight/eval/report.hpp"
#include "taillight/model/taillight_net.hpp"
#include "taillight/training/checkpoint.hpp"
#include "taillight/training/data.hpp"

namespace taillight {

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;
  std::string split;
  double loss = 0;
  double accuracy = 0;  // chunk-level percent
};

std::string metrics_header();
std::string metrics_line(const EpochRecord& record);

template <typename T>
struct BatchResult {
  GradMap<T> grads;           // already scaled for the batch loss
  T loss = 0;                 // the reduced (bootstrapped) batch loss
  std::vector<T> chunk_loss;  // plain cross-entropy per chunk
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> selected;  // chunks that received gradient
};

// Loss and gradient of one batch. For top-k the whole batch is scored
// without a graph, then only the kept chunks are re-run with one.
template <typename T>
BatchResult<T> batch_gradients(const TaillightNet<T>& net, const ParamStore<T>& params, AttentionSwitches switches,
                               std::span<const Tensor<T>> inputs, std::span<const TaillightState> labels,
                               const TrainConfig& config);

template <typename T>
std::vector<ChunkPrediction> predict_chunks(const TaillightNet<T>& net, const ParamStore<T>& params,
                                            AttentionSwitches switches, const ChunkSource& source);

template <typename T>
class Trainer {
 public:
  using Observer = std::function<void(const EpochRecord&)>;

  explicit Trainer(Config config);

  const Config& config() const { return config_; }
  const TaillightNet<T>& net() const { return net_; }

  // Stage 1 draws every group. Later stages copy `prior` and draw the newly
  // enabled attention group afresh.
  ParamStore<T> stage_entry(int stage, const Checkpoint<T>* prior) const;

  // Trains one stage from `params`; momentum starts at zero.
  Checkpoint<T> run_stage(int stage, ParamStore<T> params, const ChunkSource& train, const ChunkSource* test,
                          const Observer& observe = {});

 private:
  Config config_;
  TaillightNet<T> net_;
};

struct ProgressiveOptions {
  std::filesystem::path dataset;
  std::filesystem::path out_dir;
  int first_stage = 1;
  int last_stage = 3;
  std::ostream* log = nullptr;
};

// Writes out_dir/stage{N}.ckpt per stage and appends out_dir/metrics.csv.
// Starting past stage 1 needs the previous stage's checkpoint there.
template <typename T>
std::vector<EpochRecord> train_progressive(const Config& config, const ProgressiveOptions& options);

std::filesystem::path stage_checkpoint_path(const std::filesystem::path& dir, int stage);

}  // namespace taillight
