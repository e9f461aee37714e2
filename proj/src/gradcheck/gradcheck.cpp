#include "taillight/gradcheck/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "taillight/attention/spatial.hpp"
#include "taillight/attention/temporal.hpp"
#include "taillight/autodiff/ops.hpp"
#include "taillight/model/taillight_net.hpp"
#include "taillight/nn/lstm.hpp"
#include "taillight/training/loss.hpp"
#include "taillight/util/seed.hpp"

namespace taillight {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

ParamStore<double> with_value(const ParamStore<double>& params, const std::string& name, std::size_t index,
                              double value) {
  ParamStore<double> out = params;
  const auto& t = params.get(name);
  std::vector<double> v(t.values().begin(), t.values().end());
  v[index] = value;
  out.set(name, Tensor<double>(t.shape(), std::move(v)));
  return out;
}

struct Eval {
  double value;
  std::uint64_t kinks;
};

Eval evaluate(const ParamStore<double>& params, const LossFn& loss) {
  reset_kink_signature();
  ParamView<double> view(params);
  const double v = loss(view).item();
  return {v, kink_signature()};
}

class KinkTracking {
 public:
  KinkTracking() { set_kink_tracking(true); }
  ~KinkTracking() { set_kink_tracking(false); }
};

}  // namespace

GradcheckResult check_gradients(const std::string& name, const ParamStore<double>& params, const LossFn& loss,
                                const GradcheckConfig& config, std::uint64_t seed) {
  KinkTracking tracking;
  GradcheckResult result;
  result.name = name;

  Tape<double> tape;
  ParamView<double> view(params, &tape);
  reset_kink_signature();
  const auto out = loss(view);
  const std::uint64_t base_kinks = kink_signature();
  const auto grads = tape.backward(out);

  std::vector<std::string> names;
  for (const auto& [n, t] : params.all()) names.push_back(n);
  std::mt19937_64 rng(seed);
  const double h = config.step;
  std::size_t attempts = 0;
  while (result.probes.size() < config.probes) {
    if (++attempts > config.probes * 50) break;
    const std::string& pname = names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
    const auto& t = params.get(pname);
    const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, t.size() - 1)(rng);
    const double x = t[idx];
    const Eval plus = evaluate(with_value(params, pname, idx, x + h), loss);
    const Eval minus = evaluate(with_value(params, pname, idx, x - h), loss);
    if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
      ++result.resampled;
      continue;
    }
    Probe p;
    p.param = pname;
    p.index = idx;
    auto g = grads.find(pname);
    p.analytic = g == grads.end() ? 0.0 : g->second[idx];
    p.numeric = (plus.value - minus.value) / (2 * h);
    p.rel_error = relative_error(p.analytic, p.numeric);
    result.max_rel_error = std::max(result.max_rel_error, p.rel_error);
    result.probes.push_back(p);
  }
  return result;
}

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  return uniform_tensor<double>(std::move(shape), scale, rng);
}

// Weighted sum with fixed random coefficients: a generic scalar head.
Tensor<double> probe_sum(const Tensor<double>& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(x, random_tensor(x.shape(), rng)));
}

}  // namespace

std::vector<GradcheckResult> gradient_suite(const GradcheckConfig& config, const ModelConfig& model) {
  std::vector<GradcheckResult> results;
  std::mt19937_64 rng(config.seed);
  auto seed = [&](std::uint64_t k) { return mix_seed({config.seed, k}); };

  {  // convolution, strided and padded, with bias
    ParamStore<double> p;
    p.set("x", random_tensor({2, 3, 7, 7}, rng));
    p.set("k", random_tensor({4, 3, 3, 3}, rng));
    p.set("b", random_tensor({4}, rng));
    p.set("k1", random_tensor({3, 4, 1, 1}, rng));
    results.push_back(check_gradients("conv2d", p, [&](const ParamView<double>& v) {
      auto y = add(conv2d(v("x"), v("k"), 2, 1), reshape(v("b"), Shape{4, 1, 1}));
      return add(probe_sum(y, seed(1)), probe_sum(conv2d(y, v("k1"), 1, 0), seed(2)));
    }, config, seed(11)));
  }
  {  // dense layer, batched and single
    ParamStore<double> p;
    p.set("x", random_tensor({5, 6}, rng));
    p.set("w", random_tensor({4, 6}, rng));
    p.set("b", random_tensor({4}, rng));
    results.push_back(check_gradients("dense", p, [&](const ParamView<double>& v) {
      return add(probe_sum(linear(v("x"), v("w"), v("b")), seed(3)),
                 probe_sum(linear(select(v("x"), 2), v("w"), v("b")), seed(4)));
    }, config, seed(12)));
  }
  {  // LSTM, three steps
    Lstm<double> lstm(5, 4);
    ParamStore<double> p;
    std::mt19937_64 init(seed(5));
    lstm.init(p, init);
    p.set("z", random_tensor({3, 5}, rng));
    results.push_back(check_gradients("lstm_step", p, [&](const ParamView<double>& v) {
      auto s = lstm.zero_state();
      Tensor<double> total = Tensor<double>::scalar(0);
      for (std::size_t t = 0; t < 3; ++t) {
        s = lstm.step(v, select(v("z"), t), s);
        total = add(total, add(probe_sum(s.h, seed(20 + t)), probe_sum(s.c, seed(30 + t))));
      }
      return total;
    }, config, seed(13)));
  }
  {  // spatial attention: scores -> softmax -> weighting
    SpatialAttention<double> spatial(4, 5, 3);
    ParamStore<double> p;
    std::mt19937_64 init(seed(6));
    spatial.init(p, init);
    p.set("z", random_tensor({4, 3, 3}, rng));
    p.set("h", random_tensor({5}, rng));
    results.push_back(check_gradients("spatial_attention", p, [&](const ParamView<double>& v) {
      auto alpha = SpatialAttention<double>::weights(spatial.scores(v, v("z"), v("h")));
      return add(probe_sum(SpatialAttention<double>::apply(v("z"), alpha), seed(7)), probe_sum(alpha, seed(8)));
    }, config, seed(14)));
  }
  {  // temporal attention and output head
    TemporalAttention<double> temporal(4);
    OutputHead<double> head(4, kNumClasses);
    ParamStore<double> p;
    std::mt19937_64 init(seed(9));
    temporal.init(p, init);
    head.init(p, init);
    p.set("H", random_tensor({5, 4}, rng));
    p.set("C", random_tensor({5, 4}, rng, 2.0));
    results.push_back(check_gradients("temporal_attention", p, [&](const ParamView<double>& v) {
      auto beta = TemporalAttention<double>::weights(temporal.summaries(v, v("H"), v("C")), v("H"));
      auto mixed = TemporalAttention<double>::mix(beta, v("H"));
      return add(probe_sum(head.predict(v, mixed, v("C")), seed(10)), probe_sum(beta, seed(15)));
    }, config, seed(16)));
  }
  {  // losses: cross-entropy per chunk, then the hardest-fraction mean
    ParamStore<double> p;
    p.set("logits", random_tensor({6, kNumClasses}, rng, 3.0));
    // the bootstrap target is a constant of the loss, so fix it at the base point
    std::vector<std::vector<double>> targets;
    for (std::size_t i = 0; i < 6; ++i) {
      const auto row = select(p.get("logits"), i);
      targets.push_back(bootstrap_target<double>(row.values(), TaillightState::from_index((3 * i + 1) % kNumClasses),
                                                 0.3, LossMode::kSoftBootstrap));
    }
    results.push_back(check_gradients("losses", p, [&](const ParamView<double>& v) {
      std::vector<Tensor<double>> per_chunk;
      for (std::size_t i = 0; i < 6; ++i) {
        auto row = select(v("logits"), i);
        per_chunk.push_back(i % 2 ? chunk_loss(row, TaillightState::from_index((3 * i + 1) % kNumClasses))
                                  : chunk_loss(row, targets[i]));
      }
      return mean_top_k(stack(per_chunk), bootstrap_count(6, 0.3));
    }, config, seed(17)));
  }
  {  // whole network, both attentions live
    TaillightNet<double> net(model);
    ParamStore<double> p = net.init(seed(18));
    const auto& bb = model.backbone;
    std::mt19937_64 frames_rng(seed(19));
    const auto frames = random_tensor({3, bb.in_channels, bb.input_side, bb.input_side}, frames_rng);
    results.push_back(check_gradients("full_model", p, [&](const ParamView<double>& v) {
      return chunk_loss(net.forward(v, frames, AttentionSwitches::for_stage(3)).last_logits(),
                        TaillightState::from_index(5));
    }, config, seed(21)));
  }
  return results;
}

}  // namespace taillight
