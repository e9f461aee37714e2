#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taillight/preprocess/chunk.hpp"
#include "taillight/synth/scene.hpp"

namespace taillight {

enum class Split { kTrain, kTest };
const char* split_name(Split split);
Split parse_split(const std::string& name);

using ClassCounts = std::array<std::size_t, 8>;

struct ManifestRecord {
  std::string path;  // sequence directory, relative to the dataset root
  std::size_t frames = 0;
  TaillightState label;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  ClassCounts histogram(Split split) const;
  std::vector<ManifestRecord> of_split(Split split) const;
};

struct DatasetSpec {
  ClassCounts train_counts{};
  ClassCounts test_counts{};
  std::size_t sequence_length = 48;
  SceneParams scene;
  std::uint64_t seed = 1;
};

// Per-sequence seed, independent of generation order.
std::uint64_t sequence_seed(std::uint64_t seed, Split split, std::size_t class_index, std::size_t index);

// Writes root/<split>/<CODE>/seq_####/frame_####.ppm and root/manifest.csv.
DatasetManifest generate_dataset(const std::filesystem::path& root, const DatasetSpec& spec);

void write_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& root);

// Frames are read on demand.
class DatasetReader {
 public:
  explicit DatasetReader(std::filesystem::path root);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }
  FrameSequence load(const ManifestRecord& record) const;
  std::vector<FrameSequence> load_split(Split split) const;

 private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
};

// Per-class counts as a table: Class,OOO..BLR,Total, one row per split.
std::string distribution_table(const DatasetManifest& manifest);

// Scales a per-class count vector by `factor`, rounding half away from zero.
ClassCounts scale_counts(const ClassCounts& counts, double factor);

}  // namespace taillight
