#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gfsa/config.hpp"
#include "gfsa/matrix.hpp"
#include "gfsa/model.hpp"

namespace gfsa {

// A checkpoint is a directory: manifest.txt (key=value: the ModelConfig
// fields plus task and step) and one <param_name>.mat per parameter in the
// shared matrix text format. Optimizer moments are not persisted; resuming
// restarts Adam's moments from zero.
struct Checkpoint {
  TrainState state;
  std::string task;
};

inline void save_checkpoint(TrainState& state, const std::string& task,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ModelConfig& cfg = state.cfg;
  std::string manifest;
  manifest += "layers=" + std::to_string(cfg.layers) + "\n";
  manifest += "heads=" + std::to_string(cfg.heads) + "\n";
  manifest += "model_dim=" + std::to_string(cfg.model_dim) + "\n";
  manifest += "ffn_dim=" + std::to_string(cfg.ffn_dim) + "\n";
  manifest += "vocab=" + std::to_string(cfg.vocab) + "\n";
  manifest += "seq_len=" + std::to_string(cfg.seq_len) + "\n";
  manifest += "filter_order=" + std::to_string(cfg.filter_order) + "\n";
  manifest += "gfsa_placement=" + placement_name(cfg.placement) + "\n";
  manifest += "seed=" + std::to_string(cfg.seed) + "\n";
  manifest += "task=" + task + "\n";
  manifest += "step=" + std::to_string(state.step) + "\n";
  {
    std::ofstream out(dir / "manifest.txt", std::ios::binary);
    if (!out)
      throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
    out << manifest;
  }
  for (const ParamRef& ref : param_refs(state))
    write_matrix(*ref.mat, (dir / (ref.name + ".mat")).string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.txt";
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("cannot open checkpoint manifest '" +
                             manifest_path.string() + "'");
  auto kv = detail::parse_kv(in, manifest_path.string());

  auto need = [&](const char* key) -> const detail::KvEntry& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error(manifest_path.string() + ": missing key '" +
                               std::string(key) + "'");
    return it->second;
  };
  const std::string src = manifest_path.string();
  ModelConfig cfg;
  cfg.layers = static_cast<int>(detail::parse_int(src, need("layers"), "layers"));
  cfg.heads = static_cast<int>(detail::parse_int(src, need("heads"), "heads"));
  cfg.model_dim =
      static_cast<int>(detail::parse_int(src, need("model_dim"), "model_dim"));
  cfg.ffn_dim =
      static_cast<int>(detail::parse_int(src, need("ffn_dim"), "ffn_dim"));
  cfg.vocab = static_cast<int>(detail::parse_int(src, need("vocab"), "vocab"));
  cfg.seq_len =
      static_cast<int>(detail::parse_int(src, need("seq_len"), "seq_len"));
  cfg.filter_order = static_cast<int>(
      detail::parse_int(src, need("filter_order"), "filter_order"));
  try {
    cfg.placement = placement_from_name(need("gfsa_placement").value);
  } catch (const std::exception& ex) {
    throw std::runtime_error(src + ":" +
                             std::to_string(need("gfsa_placement").line) + ": " +
                             ex.what());
  }
  cfg.seed = detail::parse_u64(src, need("seed"), "seed");
  const std::string task = need("task").value;
  const long long step = detail::parse_int(src, need("step"), "step");
  if (step < 0) throw std::runtime_error(src + ": step must be >= 0");

  Checkpoint ck;
  ck.state = blank_state(cfg);
  ck.state.step = step;
  ck.task = task;
  for (const ParamRef& ref : param_refs(ck.state)) {
    const std::filesystem::path p = dir / (ref.name + ".mat");
    DenseMatrix m = read_matrix(p.string());
    if (m.rows() != ref.mat->rows() || m.cols() != ref.mat->cols())
      throw std::runtime_error("checkpoint parameter '" + ref.name + "' has shape " +
                               m.shape_str() + " but the manifest implies " +
                               ref.mat->shape_str());
    *ref.mat = std::move(m);
  }
  return ck;
}

}  // namespace gfsa
