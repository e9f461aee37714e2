#include "taillight/synth/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "taillight/error.hpp"
#include "taillight/synth/netpbm.hpp"
#include "taillight/util/seed.hpp"

namespace fs = std::filesystem;

namespace taillight {

const char* split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + name + "'");
}

ClassCounts DatasetManifest::histogram(Split split) const {
  ClassCounts h{};
  for (const auto& r : records)
    if (r.split == split) ++h[r.label.index()];
  return h;
}

std::vector<ManifestRecord> DatasetManifest::of_split(Split split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r);
  return out;
}

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

}  // namespace

std::uint64_t sequence_seed(std::uint64_t seed, Split split, std::size_t class_index, std::size_t index) {
  return mix_seed({seed, split == Split::kTrain ? 0x7472u : 0x7465u, class_index, index});
}

DatasetManifest generate_dataset(const fs::path& root, const DatasetSpec& spec) {
  spec.scene.validate();
  if (spec.sequence_length < spec.scene.window)
    throw ConfigError("sequence_length must be at least the window");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create dataset root " + root.string() + ": " + ec.message());

  DatasetManifest manifest;
  for (Split split : {Split::kTrain, Split::kTest}) {
    const ClassCounts& counts = split == Split::kTrain ? spec.train_counts : spec.test_counts;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const auto state = TaillightState::from_index(k);
      for (std::size_t i = 0; i < counts[k]; ++i) {
        const fs::path rel = fs::path(split_name(split)) / state.code() / numbered("seq", i);
        const fs::path final_dir = root / rel;
        const fs::path tmp_dir = root / rel.parent_path() / (rel.filename().string() + ".tmp");
        fs::remove_all(tmp_dir, ec);
        fs::create_directories(tmp_dir, ec);
        if (ec) throw DataError("cannot create " + tmp_dir.string() + ": " + ec.message());
        const auto seq = render_sequence(state, spec.scene, spec.sequence_length, sequence_seed(spec.seed, split, k, i));
        for (std::size_t t = 0; t < seq.frames.size(); ++t)
          write_ppm(tmp_dir / (numbered("frame", t) + ".ppm"), seq.frames[t]);
        fs::remove_all(final_dir, ec);
        fs::rename(tmp_dir, final_dir, ec);
        if (ec) throw DataError("cannot move " + tmp_dir.string() + " into place: " + ec.message());
        manifest.records.push_back({rel.generic_string(), seq.frames.size(), state, split});
      }
    }
  }
  write_manifest(root, manifest);
  return manifest;
}

void write_manifest(const fs::path& root, const DatasetManifest& manifest) {
  const fs::path path = root / "manifest.csv";
  const fs::path tmp = root / "manifest.csv.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << "path,frames,label,split\n";
    for (const auto& r : manifest.records)
      out << r.path << ',' << r.frames << ',' << r.label.code() << ',' << split_name(r.split) << '\n';
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
}

DatasetManifest read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.csv";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "path,frames,label,split")
    throw DataError("bad manifest header in " + path.string());
  DatasetManifest m;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 4) throw DataError("expected 4 columns at " + where);
    ManifestRecord r;
    r.path = cols[0];
    try {
      std::size_t used = 0;
      r.frames = std::stoul(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw DataError("bad frame count '" + cols[1] + "' at " + where);
    }
    try {
      r.label = TaillightState::parse(cols[2]);
    } catch (const DataError&) {
      throw DataError("unknown class code '" + cols[2] + "' at " + where);
    }
    r.split = parse_split(cols[3]);
    m.records.push_back(std::move(r));
  }
  return m;
}

DatasetReader::DatasetReader(fs::path root) : root_(std::move(root)), manifest_(read_manifest(root_)) {}

FrameSequence DatasetReader::load(const ManifestRecord& record) const {
  FrameSequence seq;
  seq.source_id = record.path;
  seq.label = record.label;
  seq.frames.reserve(record.frames);
  for (std::size_t t = 0; t < record.frames; ++t) {
    const fs::path f = root_ / record.path / (numbered("frame", t) + ".ppm");
    if (!fs::exists(f)) throw DataError("missing frame file " + f.string());
    seq.frames.push_back(read_ppm(f));
    if (!seq.frames.back().same_geometry(seq.frames.front()))
      throw DataError("frame " + f.string() + " differs in size from the first frame");
  }
  return seq;
}

std::vector<FrameSequence> DatasetReader::load_split(Split split) const {
  std::vector<FrameSequence> out;
  for (const auto& r : manifest_.records)
    if (r.split == split) out.push_back(load(r));
  return out;
}

std::string distribution_table(const DatasetManifest& manifest) {
  std::ostringstream os;
  os << "Class";
  for (auto c : kClassCodes) os << ',' << c;
  os << ",Total\n";
  for (Split s : {Split::kTrain, Split::kTest}) {
    const auto h = manifest.histogram(s);
    os << (s == Split::kTrain ? "Train samples" : "Test samples");
    std::size_t total = 0;
    for (auto n : h) {
      os << ',' << n;
      total += n;
    }
    os << ',' << total << '\n';
  }
  return os.str();
}

ClassCounts scale_counts(const ClassCounts& counts, double factor) {
  ClassCounts out{};
  for (std::size_t i = 0; i < counts.size(); ++i)
    out[i] = static_cast<std::size_t>(std::lround(static_cast<double>(counts[i]) * factor));
  return out;
}

}  // namespace taillight
