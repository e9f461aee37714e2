#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taillight/preprocess/state.hpp"

namespace taillight {

struct ChunkPrediction {
  std::string source;  // sequence the chunk came from
  std::size_t label = 0;
  std::size_t predicted = 0;
  double loss = 0;
};

using Confusion = std::array<std::array<std::size_t, 8>, 8>;  // [true][predicted]

struct AccuracyTable {
  Confusion confusion{};
  std::array<std::optional<double>, 8> per_class{};  // percent; empty when the class is absent
  double total = 0;                                  // percent, trace / sum
  std::size_t samples = 0;

  static AccuracyTable from_confusion(const Confusion& confusion);
};

struct EvalReport {
  AccuracyTable chunk_level;
  AccuracyTable video_level;  // majority vote per source, ties to the lowest class
  double mean_loss = 0;
};

EvalReport build_report(std::span<const ChunkPrediction> predictions);

// Majority class with ties to the lowest index.
std::size_t majority_vote(std::span<const std::size_t> votes);

// CSV in the comparison-table layout: Method,OOO,...,BLR,Total. Absent classes print "-".
std::string table_header();
std::string table_row(const std::string& method, const AccuracyTable& table);
std::string confusion_csv(const Confusion& confusion);

}  // namespace taillight
