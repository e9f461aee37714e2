#include "taillight/eval/report.hpp"

#include <cstdio>
#include <map>

#include "taillight/error.hpp"

namespace taillight {

AccuracyTable AccuracyTable::from_confusion(const Confusion& confusion) {
  AccuracyTable t;
  t.confusion = confusion;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    std::size_t row = 0;
    for (auto n : confusion[i]) row += n;
    t.samples += row;
    correct += confusion[i][i];
    if (row > 0) t.per_class[i] = 100.0 * static_cast<double>(confusion[i][i]) / static_cast<double>(row);
  }
  t.total = t.samples ? 100.0 * static_cast<double>(correct) / static_cast<double>(t.samples) : 0.0;
  return t;
}

std::size_t majority_vote(std::span<const std::size_t> votes) {
  if (votes.empty()) throw DataError("majority vote over no predictions");
  std::array<std::size_t, 8> counts{};
  for (auto v : votes) ++counts.at(v);
  std::size_t best = 0;
  for (std::size_t k = 1; k < 8; ++k)
    if (counts[k] > counts[best]) best = k;
  return best;
}

EvalReport build_report(std::span<const ChunkPrediction> predictions) {
  Confusion chunk{}, video{};
  std::map<std::string, std::pair<std::size_t, std::vector<std::size_t>>> per_source;
  double loss = 0;
  for (const auto& p : predictions) {
    if (p.label >= 8 || p.predicted >= 8) throw DataError("class index out of range in predictions");
    ++chunk[p.label][p.predicted];
    auto& [label, votes] = per_source[p.source];
    if (!votes.empty() && label != p.label) throw DataError("chunks of " + p.source + " carry different labels");
    label = p.label;
    votes.push_back(p.predicted);
    loss += p.loss;
  }
  for (const auto& [source, entry] : per_source) ++video[entry.first][majority_vote(entry.second)];
  EvalReport r;
  r.chunk_level = AccuracyTable::from_confusion(chunk);
  r.video_level = AccuracyTable::from_confusion(video);
  r.mean_loss = predictions.empty() ? 0.0 : loss / static_cast<double>(predictions.size());
  return r;
}

std::string table_header() {
  std::string h = "Method";
  for (auto c : kClassCodes) h += "," + std::string(c);
  return h + ",Total\n";
}

std::string table_row(const std::string& method, const AccuracyTable& table) {
  std::string row = method;
  char buf[32];
  for (const auto& cell : table.per_class) {
    if (cell) {
      std::snprintf(buf, sizeof buf, ",%.1f", *cell);
      row += buf;
    } else {
      row += ",-";
    }
  }
  std::snprintf(buf, sizeof buf, ",%.1f\n", table.total);
  return row + buf;
}

std::string confusion_csv(const Confusion& confusion) {
  std::string out = "true\\pred";
  for (auto c : kClassCodes) out += "," + std::string(c);
  out += "\n";
  for (std::size_t i = 0; i < 8; ++i) {
    out += std::string(kClassCodes[i]);
    for (auto n : confusion[i]) out += "," + std::to_string(n);
    out += "\n";
  }
  return out;
}

}  // namespace taillight
