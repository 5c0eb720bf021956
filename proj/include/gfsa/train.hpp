#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/diagnostics.hpp"
#include "gfsa/matrix.hpp"
#include "gfsa/model.hpp"
#include "gfsa/tape.hpp"
#include "gfsa/tasks.hpp"

namespace gfsa {

// One global Adam schedule for every parameter, filter coefficients
// included — no decay, no clipping, no warmup.
inline constexpr double kLearningRate = 1e-3;
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// The whole training set: one fixed batch regenerated from the task seed.
inline constexpr int kDatasetSize = 32;

struct StepMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> cos_per_layer;  // mean over samples, per block
};

namespace detail {

inline std::vector<double> layer_cosine(const Tape& tape, const ForwardBuild& fb) {
  const std::size_t samples = fb.block_out.size();
  const std::size_t layers = fb.block_out.empty() ? 0 : fb.block_out[0].size();
  std::vector<double> per_layer(layers, 0.0);
  for (std::size_t s = 0; s < samples; ++s)
    for (std::size_t l = 0; l < layers; ++l)
      per_layer[l] += mean_cosine_similarity(tape.value(fb.block_out[s][l]));
  for (double& v : per_layer) v /= static_cast<double>(samples);
  return per_layer;
}

}  // namespace detail

// One full-batch gradient step. Metrics describe the state *before* the
// update. Throws if any gradient comes back non-finite, naming the
// parameter.
inline StepMetrics train_step(TrainState& state, const Batch& batch) {
  Tape tape;
  ForwardBuild fb = build_forward(tape, state, batch, /*with_grad=*/true);

  StepMetrics m;
  m.loss = tape.value(fb.loss)(0, 0);
  m.accuracy = batch_accuracy(tape, fb, batch);
  m.cos_per_layer = detail::layer_cosine(tape, fb);
  if (!std::isfinite(m.loss))
    throw std::runtime_error("train_step: loss is not finite at step " +
                             std::to_string(state.step + 1));

  tape.backward(fb.loss);

  auto refs = param_refs(state);
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bias2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t p = 0; p < refs.size(); ++p) {
    const DenseMatrix g = tape.grad_or_zero(fb.params[p]);
    if (!g.all_finite())
      throw std::runtime_error("train_step: non-finite gradient for parameter '" +
                               refs[p].name + "' at step " +
                               std::to_string(state.step));
    DenseMatrix& w = *refs[p].mat;
    DenseMatrix& mm = state.adam_m[p];
    DenseMatrix& vv = state.adam_v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.data()[i];
      mm.data()[i] = kAdamBeta1 * mm.data()[i] + (1.0 - kAdamBeta1) * gi;
      vv.data()[i] = kAdamBeta2 * vv.data()[i] + (1.0 - kAdamBeta2) * gi * gi;
      const double mhat = mm.data()[i] / bias1;
      const double vhat = vv.data()[i] / bias2;
      w.data()[i] -= kLearningRate * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
  return m;
}

struct EpochMetrics {
  int epoch = 0;  // number of updates already applied when measured
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> cos_per_layer;
};

struct TrainRun {
  TrainState state;
  std::vector<EpochMetrics> metrics;  // epochs + 1 rows: 0 .. epochs
};

// {"epoch":0,"loss":...,"accuracy":...,"cosine_sim_per_layer":[...]}
inline std::string metrics_json_line(const EpochMetrics& m) {
  std::string line = "{\"epoch\":" + std::to_string(m.epoch);
  line += ",\"loss\":" + format_double(m.loss);
  line += ",\"accuracy\":" + format_double(m.accuracy);
  line += ",\"cosine_sim_per_layer\":[";
  for (std::size_t i = 0; i < m.cos_per_layer.size(); ++i) {
    if (i) line += ",";
    line += format_double(m.cos_per_layer[i]);
  }
  line += "]}";
  return line;
}

// Full-batch training. Row k of the metrics holds loss/accuracy/cosine
// measured after k updates, so row 0 is the initialized model and the last
// row is the final one; epochs == 0 evaluates once and changes nothing.
inline TrainRun train(const ModelConfig& cfg, const TaskSpec& task, int epochs,
                      std::ostream* metrics_out = nullptr) {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (task.vocab != cfg.vocab || task.seq_len != cfg.seq_len)
    throw std::invalid_argument(
        "train: task shape (vocab=" + std::to_string(task.vocab) + ", seq_len=" +
        std::to_string(task.seq_len) + ") does not match model (vocab=" +
        std::to_string(cfg.vocab) + ", seq_len=" + std::to_string(cfg.seq_len) + ")");

  TrainRun run;
  run.state = init_state(cfg);
  const Batch data = make_batch(task, kDatasetSize);

  auto emit = [&](const EpochMetrics& m) {
    run.metrics.push_back(m);
    if (metrics_out) *metrics_out << metrics_json_line(m) << '\n';
  };

  for (int e = 0; e < epochs; ++e) {
    StepMetrics sm = train_step(run.state, data);  // metrics are pre-update
    emit(EpochMetrics{e, sm.loss, sm.accuracy, std::move(sm.cos_per_layer)});
  }

  // Final state gets its own evaluation row.
  Tape tape;
  ForwardBuild fb = build_forward(tape, run.state, data, /*with_grad=*/false);
  EpochMetrics last;
  last.epoch = epochs;
  last.loss = tape.value(fb.loss)(0, 0);
  last.accuracy = batch_accuracy(tape, fb, data);
  last.cos_per_layer = detail::layer_cosine(tape, fb);
  if (!std::isfinite(last.loss))
    throw std::runtime_error("train: loss diverged by the final evaluation; last "
                             "finite epoch was " +
                             std::to_string(epochs - 1));
  emit(last);
  return run;
}

}  // namespace gfsa
