// gfsa_lab: command-line laboratory for graph-filter self-attention.
//
//   verify-bound   sweep the power-vs-Taylor error bound over random
//                  row-stochastic matrices and emit a CSV
//   spectrum       filter response over the singular values of an attention
//                  matrix read from a text file
//   train          train a toy encoder per a key=value config; emits JSONL
//                  metrics and a checkpoint directory
//   diagnose       reload a checkpoint and emit oversmoothing diagnostics
//
// Every command is deterministic given its seed arguments; all files use
// '\n' line endings and 17-significant-digit floats.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gfsa/harness.hpp"

namespace {

void emit(const std::string& body, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << body;
  } else {
    gfsa::detail::write_text_file(out_path, body);
  }
}

int cmd_verify_bound(int n_max, int trials, int k_min, int k_max,
                     std::uint64_t seed, const std::string& out_path) {
  const auto rows = gfsa::bound_sweep(n_max, trials, k_min, k_max, seed);
  emit(gfsa::bound_csv(rows), out_path);
  if (!gfsa::bound_rows_ok(rows)) {
    std::cerr << "error: measured approximation error exceeds the 2K bound\n";
    return 1;
  }
  return 0;
}

int cmd_spectrum(const std::string& matrix_path, double w0, double w1, double wk,
                 int k, const std::string& out_path) {
  const gfsa::DenseMatrix m = gfsa::read_matrix(matrix_path);
  const gfsa::AttentionMatrix a = gfsa::AttentionMatrix::from_matrix(m);
  const gfsa::GraphFilter f(w0, w1, wk, k);
  emit(gfsa::spectrum_csv(a, f), out_path);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              bool seed_given, std::uint64_t seed) {
  gfsa::ExperimentConfig cfg = gfsa::ExperimentConfig::parse_file(config_path);
  if (seed_given) cfg.model.seed = seed;
  const std::filesystem::path out_dir =
      out_override.empty() ? std::filesystem::path(cfg.out_dir)
                           : std::filesystem::path(out_override);
  const gfsa::TrainRun run = gfsa::run_train(cfg, out_dir);
  const gfsa::EpochMetrics& last = run.metrics.back();
  std::cout << "trained " << cfg.epochs << " epochs; final loss "
            << gfsa::format_double(last.loss) << ", accuracy "
            << gfsa::format_double(last.accuracy) << "; outputs in "
            << out_dir.string() << "\n";
  return 0;
}

int cmd_diagnose(const std::string& checkpoint_dir, std::uint64_t seed,
                 const std::string& out_dir) {
  gfsa::run_diagnose(checkpoint_dir, seed, out_dir);
  std::cout << "diagnostics written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for graph-filter-based self-attention"};
  app.require_subcommand(1);

  auto* vb = app.add_subcommand(
      "verify-bound", "measure the power-vs-Taylor error against the 2K bound");
  int vb_n_max = 64, vb_trials = 100, vb_k_min = 2, vb_k_max = 10;
  std::uint64_t vb_seed = 1;
  std::string vb_out;
  vb->add_option("--n-max", vb_n_max, "largest matrix size (sizes double from 2)");
  vb->add_option("--trials", vb_trials, "random matrices per size");
  vb->add_option("--k-min", vb_k_min, "smallest power");
  vb->add_option("--k-max", vb_k_max, "largest power");
  vb->add_option("--seed", vb_seed, "random seed");
  vb->add_option("--out", vb_out, "write CSV here instead of stdout");

  auto* sp = app.add_subcommand(
      "spectrum", "filter response over an attention matrix's singular values");
  std::string sp_matrix, sp_out;
  double sp_w0 = 0.0, sp_w1 = 1.0, sp_wk = 0.0;
  int sp_k = 3;
  sp->add_option("--matrix", sp_matrix, "attention matrix text file")->required();
  sp->add_option("--w0", sp_w0, "identity-term coefficient");
  sp->add_option("--w1", sp_w1, "linear-term coefficient");
  sp->add_option("--wk", sp_wk, "high-order-term coefficient");
  sp->add_option("--K", sp_k, "filter order");
  sp->add_option("--out", sp_out, "write CSV here instead of stdout");

  auto* tr = app.add_subcommand("train", "train a toy encoder from a config file");
  std::string tr_config, tr_out;
  std::uint64_t tr_seed = 0;
  tr->add_option("--config", tr_config, "key=value experiment config")->required();
  tr->add_option("--out", tr_out, "output directory (overrides config out_dir)");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "override the config seed");

  auto* dg = app.add_subcommand("diagnose",
                                "oversmoothing diagnostics for a checkpoint");
  std::string dg_checkpoint, dg_out = "diagnostics";
  std::uint64_t dg_seed = 1;
  dg->add_option("--checkpoint", dg_checkpoint, "checkpoint directory")->required();
  dg->add_option("--seed", dg_seed, "evaluation batch seed");
  dg->add_option("--out", dg_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (vb->parsed())
      return cmd_verify_bound(vb_n_max, vb_trials, vb_k_min, vb_k_max, vb_seed,
                              vb_out);
    if (sp->parsed())
      return cmd_spectrum(sp_matrix, sp_w0, sp_w1, sp_wk, sp_k, sp_out);
    if (tr->parsed())
      return cmd_train(tr_config, tr_out, tr_seed_opt->count() > 0, tr_seed);
    if (dg->parsed()) return cmd_diagnose(dg_checkpoint, dg_seed, dg_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
