#include "taillight/training/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "taillight/attention/temporal.hpp"
#include "taillight/autodiff/ops.hpp"
#include "taillight/error.hpp"
#include "taillight/log.hpp"
#include "taillight/training/loss.hpp"
#include "taillight/training/optimizer.hpp"
#include "taillight/util/seed.hpp"

namespace fs = std::filesystem;

namespace taillight {

std::string metrics_header() { return "stage,epoch,split,loss,accuracy\n"; }

std::string metrics_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%zu,%s,%.9g,%.4f\n", r.stage, r.epoch, r.split.c_str(), r.loss, r.accuracy);
  return buf;
}

fs::path stage_checkpoint_path(const fs::path& dir, int stage) {
  return dir / ("stage" + std::to_string(stage) + ".ckpt");
}

namespace {

template <typename T>
void accumulate(GradMap<T>& into, const GradMap<T>& g) {
  for (const auto& [name, t] : g) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, t.detach());
      continue;
    }
    std::vector<T> sum(it->second.values().begin(), it->second.values().end());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += t[i];
    it->second = Tensor<T>(t.shape(), std::move(sum));
  }
}

template <typename T>
void check_loss(T value) {
  if (!std::isfinite(static_cast<double>(value))) throw NumericError("non-finite training loss");
}

}  // namespace

template <typename T>
BatchResult<T> batch_gradients(const TaillightNet<T>& net, const ParamStore<T>& params, AttentionSwitches switches,
                               std::span<const Tensor<T>> inputs, std::span<const TaillightState> labels,
                               const TrainConfig& config) {
  if (inputs.empty()) throw DataError("empty training batch");
  if (inputs.size() != labels.size()) throw ShapeError("batch inputs and labels differ in length");
  const std::size_t B = inputs.size();
  BatchResult<T> out;
  out.chunk_loss.resize(B);
  out.predicted.resize(B);

  if (config.loss_mode == LossMode::kTopK) {
    ParamView<T> frozen(params);
    for (std::size_t i = 0; i < B; ++i) {
      const auto logits = net.forward(frozen, inputs[i], switches).last_logits();
      out.chunk_loss[i] = chunk_loss(logits, labels[i]).item();
      out.predicted[i] = argmax_class<T>(logits.values());
      check_loss(out.chunk_loss[i]);
    }
    const std::size_t k = bootstrap_count(B, config.bootstrap_ratio);
    out.selected = top_k_indices<T>(out.chunk_loss, k);
    out.loss = bootstrapped_batch_loss<T>(out.chunk_loss, config.bootstrap_ratio);
    std::vector<std::size_t> order = out.selected;
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) {
      Tape<T> tape;
      ParamView<T> view(params, &tape);
      const auto loss = chunk_loss(net.forward(view, inputs[i], switches).last_logits(), labels[i]);
      accumulate(out.grads, tape.backward(loss, T(1) / static_cast<T>(k)));
    }
    return out;
  }

  T total = 0;
  for (std::size_t i = 0; i < B; ++i) {
    Tape<T> tape;
    ParamView<T> view(params, &tape);
    const auto logits = net.forward(view, inputs[i], switches).last_logits();
    out.chunk_loss[i] = chunk_loss(logits.detach(), labels[i]).item();
    out.predicted[i] = argmax_class<T>(logits.values());
    check_loss(out.chunk_loss[i]);
    const auto target = bootstrap_target<T>(logits.values(), labels[i], config.bootstrap_ratio, config.loss_mode);
    const auto loss = chunk_loss(logits, target);
    total += loss.item();
    accumulate(out.grads, tape.backward(loss, T(1) / static_cast<T>(B)));
    out.selected.push_back(i);
  }
  out.loss = total / static_cast<T>(B);
  return out;
}

template <typename T>
std::vector<ChunkPrediction> predict_chunks(const TaillightNet<T>& net, const ParamStore<T>& params,
                                            AttentionSwitches switches, const ChunkSource& source) {
  std::vector<ChunkPrediction> out;
  out.reserve(source.size());
  ParamView<T> view(params);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Chunk c = source.chunk(i);
    const auto logits = net.forward(view, chunk_tensor<T>(c), switches).last_logits();
    out.push_back({c.origin.source_id, c.label.index(), argmax_class<T>(logits.values()),
                   static_cast<double>(chunk_loss(logits, c.label).item())});
  }
  return out;
}

template <typename T>
Trainer<T>::Trainer(Config config) : config_(std::move(config)), net_(config_.model) {}

template <typename T>
ParamStore<T> Trainer<T>::stage_entry(int stage, const Checkpoint<T>* prior) const {
  if (stage < 1 || stage > 3) throw ConfigError("stage must be 1, 2 or 3");
  if (stage == 1) return net_.init(config_.train.seed);
  if (!prior) throw DataError("stage " + std::to_string(stage) + " needs the stage " + std::to_string(stage - 1) + " checkpoint");
  ParamStore<T> params = prior->params;
  std::mt19937_64 rng(mix_seed({config_.train.seed, static_cast<std::uint64_t>(stage), 0x1a7e}));
  net_.init_group(params, stage == 2 ? ParamGroup::kTemporal : ParamGroup::kSpatial, rng);
  return params;
}

template <typename T>
Checkpoint<T> Trainer<T>::run_stage(int stage, ParamStore<T> params, const ChunkSource& train, const ChunkSource* test,
                                    const Observer& observe) {
  if (train.size() == 0) throw DataError("no training chunks");
  const auto& tc = config_.train;
  const auto switches = AttentionSwitches::for_stage(stage);
  const bool was_checking = finite_check_enabled();
  set_finite_check(tc.check_finite || was_checking);

  SgdMomentum<T> sgd(tc.learning_rate, tc.momentum);
  auto enabled = [&](const std::string& name) { return switches.enables(group_of(name)); };
  std::mt19937_64 rng(mix_seed({tc.seed, static_cast<std::uint64_t>(stage), 0x5e9}));
  std::vector<std::size_t> order(train.size());
  const std::size_t epochs = tc.epochs[static_cast<std::size_t>(stage - 1)];

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + tc.batch_size);
      std::vector<Tensor<T>> inputs;
      std::vector<TaillightState> labels;
      for (std::size_t j = b0; j < b1; ++j) {
        const std::size_t idx = order[j];
        Chunk c = config_.augment
                      ? train.augmented(idx, sample_augment(config_.augment_ranges,
                                                            mix_seed({tc.seed, static_cast<std::uint64_t>(stage), epoch, idx})))
                      : train.chunk(idx);
        inputs.push_back(chunk_tensor<T>(c));
        labels.push_back(c.label);
      }
      auto batch = batch_gradients<T>(net_, params, switches, inputs, labels, tc);
      for (std::size_t j = 0; j < labels.size(); ++j) {
        loss_sum += static_cast<double>(batch.chunk_loss[j]);
        correct += batch.predicted[j] == labels[j].index();
      }
      sgd.step(params, batch.grads, enabled);
    }
    EpochRecord rec{stage, epoch, "train", loss_sum / static_cast<double>(train.size()),
                    100.0 * static_cast<double>(correct) / static_cast<double>(train.size())};
    if (observe) observe(rec);
    if (test && test->size() > 0 && (tc.eval_each_epoch || epoch + 1 == epochs)) {
      const auto preds = predict_chunks<T>(net_, params, switches, *test);
      const auto report = build_report(preds);
      if (observe) observe({stage, epoch, "test", report.mean_loss, report.chunk_level.total});
    }
  }
  set_finite_check(was_checking);

  Checkpoint<T> ck;
  ck.stage = stage;
  ck.config_text = config_.to_text();
  ck.params = std::move(params);
  ck.momentum = sgd.velocity();
  std::ostringstream rs;
  rs << rng;
  ck.rng_state = rs.str();
  return ck;
}

template <typename T>
std::vector<EpochRecord> train_progressive(const Config& config, const ProgressiveOptions& options) {
  if (options.first_stage < 1 || options.last_stage > 3 || options.first_stage > options.last_stage)
    throw ConfigError("stages must satisfy 1 <= first <= last <= 3");
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + options.out_dir.string());

  std::optional<Checkpoint<T>> prior;
  if (options.first_stage > 1) {
    const auto path = stage_checkpoint_path(options.out_dir, options.first_stage - 1);
    if (!fs::exists(path))
      throw DataError("stage " + std::to_string(options.first_stage) + " needs " + path.string());
    prior = load_checkpoint<T>(path);
  }

  DatasetReader reader(options.dataset);
  const ChunkSource train = load_chunks(reader, Split::kTrain, config);
  const ChunkSource test = load_chunks(reader, Split::kTest, config);
  log_info("training on " + std::to_string(train.size()) + " chunks, testing on " + std::to_string(test.size()));

  const fs::path metrics_path = options.out_dir / "metrics.csv";
  const bool fresh = !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw DataError("cannot write " + metrics_path.string());
  if (fresh) metrics << metrics_header();

  std::vector<EpochRecord> records;
  Trainer<T> trainer(config);
  for (int stage = options.first_stage; stage <= options.last_stage; ++stage) {
    auto params = trainer.stage_entry(stage, prior ? &*prior : nullptr);
    prior = trainer.run_stage(stage, std::move(params), train, &test, [&](const EpochRecord& r) {
      records.push_back(r);
      metrics << metrics_line(r) << std::flush;
      if (options.log) *options.log << metrics_line(r) << std::flush;
    });
    save_checkpoint(stage_checkpoint_path(options.out_dir, stage), *prior);
  }
  return records;
}

#define TAILLIGHT_INSTANTIATE_TRAINER(T)                                                                         \
  template BatchResult<T> batch_gradients<T>(const TaillightNet<T>&, const ParamStore<T>&, AttentionSwitches,    \
                                             std::span<const Tensor<T>>, std::span<const TaillightState>,      \
                                             const TrainConfig&);                                              \
  template std::vector<ChunkPrediction> predict_chunks<T>(const TaillightNet<T>&, const ParamStore<T>&,          \
                                                          AttentionSwitches, const ChunkSource&);              \
  template class Trainer<T>;                                                                                     \
  template std::vector<EpochRecord> train_progressive<T>(const Config&, const ProgressiveOptions&);

TAILLIGHT_INSTANTIATE_TRAINER(float)
TAILLIGHT_INSTANTIATE_TRAINER(double)

}  // namespace taillight
