#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/matrix.hpp"
#include "gfsa/rng.hpp"
#include "gfsa/tape.hpp"

namespace gfsa {

enum class Placement { kAll, kEvenOnly, kNone };

inline std::string placement_name(Placement p) {
  switch (p) {
    case Placement::kAll: return "all";
    case Placement::kEvenOnly: return "even_only";
    case Placement::kNone: return "none";
  }
  return "none";
}

inline Placement placement_from_name(const std::string& s) {
  if (s == "all") return Placement::kAll;
  if (s == "even_only") return Placement::kEvenOnly;
  if (s == "none") return Placement::kNone;
  throw std::invalid_argument("unknown gfsa_placement '" + s +
                              "', expected all | even_only | none");
}

// Encoder description. Blocks are pre-norm residual: RMS-normalized
// multi-head SA/GFSA, then an RMS-normalized two-layer GELU FFN, no
// biases and no dropout anywhere.
struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int model_dim = 32;
  int ffn_dim = 64;
  int vocab = 16;
  int seq_len = 8;
  int filter_order = 3;
  Placement placement = Placement::kAll;
  std::uint64_t seed = 42;

  void validate() const {
    if (layers < 1)
      throw std::invalid_argument("ModelConfig: layers must be >= 1");
    if (heads < 1 || model_dim < 1 || model_dim % heads != 0)
      throw std::invalid_argument("ModelConfig: heads=" + std::to_string(heads) +
                                  " must divide model_dim=" +
                                  std::to_string(model_dim));
    if (filter_order < 1)
      throw std::invalid_argument("ModelConfig: filter_order must be >= 1, got " +
                                  std::to_string(filter_order));
    if (vocab < 2)
      throw std::invalid_argument("ModelConfig: vocab must be >= 2");
    if (seq_len < 2)
      throw std::invalid_argument("ModelConfig: seq_len must be >= 2");
    if (ffn_dim < 1)
      throw std::invalid_argument("ModelConfig: ffn_dim must be >= 1");
  }

  int head_dim() const { return model_dim / heads; }

  // even_only applies the graph filter at even 0-based indices; odd layers
  // stay plain self-attention.
  bool layer_uses_gfsa(int layer) const {
    switch (placement) {
      case Placement::kAll: return true;
      case Placement::kEvenOnly: return layer % 2 == 0;
      case Placement::kNone: return false;
    }
    return false;
  }
};

struct LayerParams {
  DenseMatrix w_qry, w_key, w_val;  // d x d
  DenseMatrix ffn_w1;               // d x ffn
  DenseMatrix ffn_w2;               // ffn x d
};

// All learnable state plus Adam moments. Coefficients live as L x h
// matrices so a whole training run checkpoints as a handful of files.
struct TrainState {
  ModelConfig cfg;
  DenseMatrix embedding;   // vocab x d
  DenseMatrix positional;  // n x d
  DenseMatrix output;      // d x vocab
  std::vector<LayerParams> layers;
  DenseMatrix w0, w1, wk;  // L x h each

  std::vector<DenseMatrix> adam_m, adam_v;
  long step = 0;
};

struct ParamRef {
  std::string name;
  DenseMatrix* mat;
};

// Canonical parameter order; Adam moments, checkpoints and gradient checks
// all index through this.
inline std::vector<ParamRef> param_refs(TrainState& s) {
  std::vector<ParamRef> refs;
  refs.push_back({"embedding", &s.embedding});
  refs.push_back({"positional", &s.positional});
  refs.push_back({"output", &s.output});
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    refs.push_back({p + "w_qry", &s.layers[l].w_qry});
    refs.push_back({p + "w_key", &s.layers[l].w_key});
    refs.push_back({p + "w_val", &s.layers[l].w_val});
    refs.push_back({p + "ffn_w1", &s.layers[l].ffn_w1});
    refs.push_back({p + "ffn_w2", &s.layers[l].ffn_w2});
  }
  refs.push_back({"w0", &s.w0});
  refs.push_back({"w1", &s.w1});
  refs.push_back({"wk", &s.wk});
  return refs;
}

namespace detail {

inline DenseMatrix gaussian(std::size_t r, std::size_t c, double stddev, Rng& rng) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

}  // namespace detail

// Weight init: N(0, 1/sqrt(fan_in)). Filter coefficients start at
// (w0, w1, wK) = (0, 1, 0), which makes an untrained GFSA model exactly the
// baseline transformer.
inline TrainState init_state(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto d = static_cast<std::size_t>(cfg.model_dim);
  const auto ffn = static_cast<std::size_t>(cfg.ffn_dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sf = 1.0 / std::sqrt(static_cast<double>(ffn));

  TrainState s;
  s.cfg = cfg;
  s.embedding = detail::gaussian(cfg.vocab, d, sd, rng);
  s.positional = detail::gaussian(cfg.seq_len, d, sd, rng);
  s.output = detail::gaussian(d, cfg.vocab, sd, rng);
  s.layers.resize(cfg.layers);
  for (auto& lp : s.layers) {
    lp.w_qry = detail::gaussian(d, d, sd, rng);
    lp.w_key = detail::gaussian(d, d, sd, rng);
    lp.w_val = detail::gaussian(d, d, sd, rng);
    lp.ffn_w1 = detail::gaussian(d, ffn, sd, rng);
    lp.ffn_w2 = detail::gaussian(ffn, d, sf, rng);
  }
  s.w0 = DenseMatrix(cfg.layers, cfg.heads, 0.0);
  s.w1 = DenseMatrix(cfg.layers, cfg.heads, 1.0);
  s.wk = DenseMatrix(cfg.layers, cfg.heads, 0.0);

  auto refs = param_refs(s);
  s.adam_m.reserve(refs.size());
  s.adam_v.reserve(refs.size());
  for (const auto& r : refs) {
    s.adam_m.emplace_back(r.mat->rows(), r.mat->cols());
    s.adam_v.emplace_back(r.mat->rows(), r.mat->cols());
  }
  return s;
}

// Zero-filled state with the right shapes, for checkpoint loading.
inline TrainState blank_state(const ModelConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.model_dim);
  const auto ffn = static_cast<std::size_t>(cfg.ffn_dim);
  TrainState s;
  s.cfg = cfg;
  s.embedding = DenseMatrix(cfg.vocab, d);
  s.positional = DenseMatrix(cfg.seq_len, d);
  s.output = DenseMatrix(d, cfg.vocab);
  s.layers.resize(cfg.layers);
  for (auto& lp : s.layers) {
    lp.w_qry = DenseMatrix(d, d);
    lp.w_key = DenseMatrix(d, d);
    lp.w_val = DenseMatrix(d, d);
    lp.ffn_w1 = DenseMatrix(d, ffn);
    lp.ffn_w2 = DenseMatrix(ffn, d);
  }
  s.w0 = DenseMatrix(cfg.layers, cfg.heads);
  s.w1 = DenseMatrix(cfg.layers, cfg.heads);
  s.wk = DenseMatrix(cfg.layers, cfg.heads);
  auto refs = param_refs(s);
  for (const auto& r : refs) {
    s.adam_m.emplace_back(r.mat->rows(), r.mat->cols());
    s.adam_v.emplace_back(r.mat->rows(), r.mat->cols());
  }
  return s;
}

struct Batch {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;

  std::size_t size() const { return inputs.size(); }
};

// Everything the training step and the diagnostics need from one forward
// pass over a batch, with variable ids into the tape that produced it.
struct ForwardBuild {
  Tape::VarId loss = -1;
  std::vector<Tape::VarId> logits;                          // [sample]
  std::vector<std::vector<Tape::VarId>> block_out;          // [sample][layer]
  std::vector<std::vector<std::vector<Tape::VarId>>> attn;  // [sample][layer][head]
  std::vector<Tape::VarId> params;                          // aligned with param_refs
};

inline ForwardBuild build_forward(Tape& tape, TrainState& state, const Batch& batch,
                                  bool with_grad = true) {
  const ModelConfig& cfg = state.cfg;
  cfg.validate();
  if (batch.size() == 0)
    throw std::invalid_argument("build_forward: empty batch");
  if (batch.targets.size() != batch.inputs.size())
    throw std::invalid_argument("build_forward: " + std::to_string(batch.inputs.size()) +
                                " inputs but " + std::to_string(batch.targets.size()) +
                                " target rows");
  const auto n = static_cast<std::size_t>(cfg.seq_len);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    if (batch.inputs[s].size() != n || batch.targets[s].size() != n)
      throw std::invalid_argument("build_forward: sample " + std::to_string(s) +
                                  " length does not match seq_len=" +
                                  std::to_string(cfg.seq_len));
    for (int id : batch.inputs[s])
      if (id < 0 || id >= cfg.vocab)
        throw std::invalid_argument("build_forward: token id " + std::to_string(id) +
                                    " out of range for vocab " +
                                    std::to_string(cfg.vocab));
  }

  ForwardBuild fb;
  auto refs = param_refs(state);
  fb.params.reserve(refs.size());
  for (auto& r : refs) fb.params.push_back(tape.input(*r.mat, with_grad));
  const Tape::VarId v_emb = fb.params[0];
  const Tape::VarId v_pos = fb.params[1];
  const Tape::VarId v_out = fb.params[2];
  const std::size_t coeff_base = fb.params.size() - 3;
  const Tape::VarId v_w0 = fb.params[coeff_base];
  const Tape::VarId v_w1 = fb.params[coeff_base + 1];
  const Tape::VarId v_wk = fb.params[coeff_base + 2];
  auto layer_param = [&](int l, int slot) {
    return fb.params[3 + static_cast<std::size_t>(l) * 5 + slot];
  };

  const Tape::VarId v_ident = tape.constant(DenseMatrix::identity(n));
  const std::size_t hd = static_cast<std::size_t>(cfg.head_dim());
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double km1 = static_cast<double>(cfg.filter_order - 1);

  Tape::VarId total_loss = -1;
  fb.logits.reserve(batch.size());
  fb.block_out.resize(batch.size());
  fb.attn.resize(batch.size());

  for (std::size_t s = 0; s < batch.size(); ++s) {
    Tape::VarId x = tape.add(tape.embed(v_emb, batch.inputs[s]), v_pos);
    fb.block_out[s].reserve(cfg.layers);
    fb.attn[s].resize(cfg.layers);

    for (int l = 0; l < cfg.layers; ++l) {
      const Tape::VarId xn = tape.rmsnorm_rows(x);
      const Tape::VarId q = tape.matmul(xn, layer_param(l, 0));
      const Tape::VarId k = tape.matmul(xn, layer_param(l, 1));
      const Tape::VarId v = tape.matmul(xn, layer_param(l, 2));

      std::vector<Tape::VarId> head_outs;
      head_outs.reserve(cfg.heads);
      fb.attn[s][l].reserve(cfg.heads);
      for (int h = 0; h < cfg.heads; ++h) {
        const std::size_t c0 = static_cast<std::size_t>(h) * hd;
        const Tape::VarId qh = tape.slice_cols(q, c0, c0 + hd);
        const Tape::VarId kh = tape.slice_cols(k, c0, c0 + hd);
        const Tape::VarId vh = tape.slice_cols(v, c0, c0 + hd);
        const Tape::VarId scores = tape.scale(tape.matmul_nt(qh, kh), attn_scale);
        const Tape::VarId att = tape.softmax_rows(scores);
        fb.attn[s][l].push_back(att);

        Tape::VarId head_out;
        if (cfg.layer_uses_gfsa(l)) {
          const Tape::VarId att_sq = tape.matmul(att, att);
          const Tape::VarId high =
              tape.add(att, tape.scale(tape.sub(att_sq, att), km1));
          const Tape::VarId c0v = tape.select_entry(v_w0, l, h);
          const Tape::VarId c1v = tape.select_entry(v_w1, l, h);
          const Tape::VarId ckv = tape.select_entry(v_wk, l, h);
          const Tape::VarId filt =
              tape.add(tape.add(tape.scalar_mul(c0v, v_ident),
                                tape.scalar_mul(c1v, att)),
                       tape.scalar_mul(ckv, high));
          head_out = tape.matmul(filt, vh);
        } else {
          head_out = tape.matmul(att, vh);
        }
        head_outs.push_back(head_out);
      }

      x = tape.add(x, tape.concat_cols(head_outs));
      const Tape::VarId xn2 = tape.rmsnorm_rows(x);
      const Tape::VarId ffn =
          tape.matmul(tape.gelu(tape.matmul(xn2, layer_param(l, 3))),
                      layer_param(l, 4));
      x = tape.add(x, ffn);
      fb.block_out[s].push_back(x);
    }

    const Tape::VarId logits = tape.matmul(tape.rmsnorm_rows(x), v_out);
    fb.logits.push_back(logits);
    const Tape::VarId sample_loss = tape.cross_entropy(logits, batch.targets[s]);
    total_loss = (total_loss < 0) ? sample_loss : tape.add(total_loss, sample_loss);
  }

  fb.loss = tape.scale(total_loss, 1.0 / static_cast<double>(batch.size()));
  return fb;
}

struct ForwardResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<DenseMatrix> logits;                          // [sample]
  std::vector<std::vector<DenseMatrix>> features;           // [sample][layer]
  std::vector<std::vector<std::vector<DenseMatrix>>> attention;  // [s][l][h]
};

inline double batch_accuracy(const Tape& tape, const ForwardBuild& fb,
                             const Batch& batch) {
  std::size_t hits = 0, total = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const DenseMatrix& z = tape.value(fb.logits[s]);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < z.cols(); ++j)
        if (z(i, j) > z(i, best)) best = j;
      hits += (static_cast<int>(best) == batch.targets[s][i]) ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Inference-style forward: runs the tape, extracts values, drops the tape.
inline ForwardResult forward(TrainState& state, const Batch& batch) {
  Tape tape;
  ForwardBuild fb = build_forward(tape, state, batch, /*with_grad=*/false);
  ForwardResult res;
  res.loss = tape.value(fb.loss)(0, 0);
  res.accuracy = batch_accuracy(tape, fb, batch);
  res.logits.reserve(batch.size());
  res.features.resize(batch.size());
  res.attention.resize(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    res.logits.push_back(tape.value(fb.logits[s]));
    for (auto id : fb.block_out[s]) res.features[s].push_back(tape.value(id));
    res.attention[s].resize(fb.attn[s].size());
    for (std::size_t l = 0; l < fb.attn[s].size(); ++l)
      for (auto id : fb.attn[s][l]) res.attention[s][l].push_back(tape.value(id));
  }
  return res;
}

}  // namespace gfsa
