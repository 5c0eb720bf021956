#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/attention.hpp"
#include "gfsa/checkpoint.hpp"
#include "gfsa/config.hpp"
#include "gfsa/diagnostics.hpp"
#include "gfsa/graph_filter.hpp"
#include "gfsa/matrix.hpp"
#include "gfsa/model.hpp"
#include "gfsa/rng.hpp"
#include "gfsa/svd.hpp"
#include "gfsa/tasks.hpp"
#include "gfsa/train.hpp"

namespace gfsa {

// Slack granted on top of the proven 2K ceiling so pure float noise never
// trips a violation.
inline constexpr double kBoundSlack = 1e-9;

struct BoundRow {
  int k = 0;
  double max_actual = 0.0;
  double mean_actual = 0.0;
  double bound = 0.0;
};

// Measures the power-vs-Taylor error over random row-stochastic matrices of
// sizes 2, 4, 8, ... up to n_max (`trials` draws per size), for every order
// in [k_min, k_max]. Exact powers are accumulated incrementally, so each
// trial costs k_max matrix products.
inline std::vector<BoundRow> bound_sweep(int n_max, int trials, int k_min,
                                         int k_max, std::uint64_t seed) {
  if (n_max < 2) throw std::invalid_argument("bound_sweep: n_max must be >= 2");
  if (trials < 1) throw std::invalid_argument("bound_sweep: trials must be >= 1");
  if (k_min < 1 || k_max < k_min)
    throw std::invalid_argument("bound_sweep: need 1 <= k_min <= k_max, got [" +
                                std::to_string(k_min) + ", " +
                                std::to_string(k_max) + "]");

  std::vector<BoundRow> rows;
  for (int k = k_min; k <= k_max; ++k)
    rows.push_back(BoundRow{k, 0.0, 0.0, 2.0 * k});

  Rng rng(seed);
  long long samples = 0;
  for (std::size_t n = 2; n <= static_cast<std::size_t>(n_max); n *= 2) {
    for (int t = 0; t < trials; ++t) {
      const AttentionMatrix att = random_row_stochastic(n, rng);
      const DenseMatrix& a = att.mat();
      const DenseMatrix a_sq = matmul(a, a);
      DenseMatrix power = a;             // holds a^k as k advances
      for (int k = 2; k <= k_max; ++k) {
        power = matmul(power, a);
        if (k < k_min) continue;
        const DenseMatrix approx = detail::taylor_power_from_sq(a, a_sq, k);
        const double err = linf_norm(sub(power, approx));
        BoundRow& row = rows[static_cast<std::size_t>(k - k_min)];
        if (err > row.max_actual) row.max_actual = err;
        row.mean_actual += err;
      }
      ++samples;
    }
  }
  if (k_min == 1) {  // taylor at 1 is the matrix itself: error identically 0
    rows[0].max_actual = 0.0;
    rows[0].mean_actual = 0.0;
  }
  for (BoundRow& row : rows)
    if (row.k > 1) row.mean_actual /= static_cast<double>(samples);
  return rows;
}

inline bool bound_rows_ok(const std::vector<BoundRow>& rows) {
  for (const BoundRow& r : rows)
    if (!(r.max_actual <= r.bound + kBoundSlack)) return false;
  return true;
}

inline std::string bound_csv(const std::vector<BoundRow>& rows) {
  std::string out = "K,max_actual_EK,mean_actual_EK,bound\n";
  for (const BoundRow& r : rows) {
    out += std::to_string(r.k);
    out += "," + format_double(r.max_actual);
    out += "," + format_double(r.mean_actual);
    out += "," + format_double(r.bound);
    out += "\n";
  }
  return out;
}

// sigma,response table for one filter head over an attention matrix read
// from file or built in memory.
inline std::string spectrum_csv(const AttentionMatrix& a, const GraphFilter& f,
                                std::size_t head = 0) {
  const SpectralReport rep = filter_response(f, head, attention_spectrum(a));
  std::string out = "sigma,response\n";
  for (std::size_t i = 0; i < rep.sigma.size(); ++i)
    out += format_double(rep.sigma[i]) + "," + format_double(rep.response[i]) + "\n";
  return out;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
  if (!out) throw std::runtime_error("failed while writing '" + path.string() + "'");
}

}  // namespace detail

// Trains per the config and writes <out_dir>/metrics.jsonl plus a
// checkpoint under <out_dir>/checkpoint/.
inline TrainRun run_train(const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const TaskSpec task =
      make_task(cfg.task, cfg.model.vocab, cfg.model.seq_len, cfg.model.seed);
  std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics)
    throw std::runtime_error("cannot write '" +
                             (out_dir / "metrics.jsonl").string() + "'");
  TrainRun run = train(cfg.model, task, cfg.epochs, &metrics);
  metrics.close();
  save_checkpoint(run.state, cfg.task, out_dir / "checkpoint");
  return run;
}

// Reloads a checkpoint, evaluates one fresh batch, and writes the three
// diagnostic tables:
//   cosine_similarity.csv      step,cosine_similarity   (per block, 1-based)
//   feature_spectrum.csv       sigma                    (sample 0, last block)
//   attention_spectrum_h<i>.csv sigma,response          (sample 0, last layer,
//                                                        that head's filter)
inline void run_diagnose(const std::filesystem::path& checkpoint_dir,
                         std::uint64_t eval_seed,
                         const std::filesystem::path& out_dir) {
  Checkpoint ck = load_checkpoint(checkpoint_dir);
  const ModelConfig& cfg = ck.state.cfg;
  const TaskSpec task = make_task(ck.task, cfg.vocab, cfg.seq_len, cfg.seed);
  const Batch batch = make_batch_seeded(task, kDatasetSize, eval_seed);
  const ForwardResult res = forward(ck.state, batch);

  std::filesystem::create_directories(out_dir);

  std::string cos_csv = "step,cosine_similarity\n";
  for (int l = 0; l < cfg.layers; ++l) {
    double mean = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s)
      mean += mean_cosine_similarity(res.features[s][static_cast<std::size_t>(l)]);
    mean /= static_cast<double>(batch.size());
    cos_csv += std::to_string(l + 1) + "," + format_double(mean) + "\n";
  }
  detail::write_text_file(out_dir / "cosine_similarity.csv", cos_csv);

  const DenseMatrix& last_features = res.features[0].back();
  std::string feat_csv = "sigma\n";
  for (double s : singular_values(last_features)) feat_csv += format_double(s) + "\n";
  detail::write_text_file(out_dir / "feature_spectrum.csv", feat_csv);

  const int last = cfg.layers - 1;
  for (int h = 0; h < cfg.heads; ++h) {
    const DenseMatrix& att =
        res.attention[0][static_cast<std::size_t>(last)][static_cast<std::size_t>(h)];
    // The response curve uses the filter this layer actually applies: the
    // learned coefficients where the graph filter is placed, plain
    // attention (= identity response) elsewhere.
    double w0 = 0.0, w1 = 1.0, wk = 0.0;
    if (cfg.layer_uses_gfsa(last)) {
      w0 = ck.state.w0(last, h);
      w1 = ck.state.w1(last, h);
      wk = ck.state.wk(last, h);
    }
    const GraphFilter f(w0, w1, wk, cfg.filter_order);
    const AttentionMatrix am = AttentionMatrix::from_matrix(att);
    detail::write_text_file(out_dir / ("attention_spectrum_h" + std::to_string(h) +
                                       ".csv"),
                            spectrum_csv(am, f));
  }
}

}  // namespace gfsa
