#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/model.hpp"

namespace gfsa {
namespace detail {

struct KvEntry {
  std::string value;
  int line = 0;
};

// Flat key=value lines; blank lines and '#' comments allowed. Duplicate or
// malformed keys are reported with their line number.
inline std::map<std::string, KvEntry> parse_kv(std::istream& in,
                                               const std::string& source) {
  std::map<std::string, KvEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(source + ":" + std::to_string(lineno) +
                               ": expected key=value, got '" + line + "'");
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const std::size_t b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(source + ":" + std::to_string(lineno) +
                               ": empty key");
    if (out.count(key))
      throw std::runtime_error(source + ":" + std::to_string(lineno) +
                               ": duplicate key '" + key + "' (first at line " +
                               std::to_string(out[key].line) + ")");
    out[key] = KvEntry{value, lineno};
  }
  return out;
}

inline long long parse_int(const std::string& source, const KvEntry& e,
                           const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(source + ":" + std::to_string(e.line) +
                             ": key '" + key + "' needs an integer, got '" +
                             e.value + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& source, const KvEntry& e,
                               const std::string& key) {
  try {
    // stoull silently wraps negative input modulo 2^64; reject it up front.
    if (e.value.find('-') != std::string::npos)
      throw std::invalid_argument("negative");
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(source + ":" + std::to_string(e.line) + ": key '" +
                             key + "' needs an unsigned integer, got '" +
                             e.value + "'");
  }
}

}  // namespace detail

// Experiment description read from a flat key=value file. Every key is
// optional; the defaults below apply when a key is absent. Unknown keys are
// errors so typos never silently fall back to defaults.
struct ExperimentConfig {
  ModelConfig model;          // layers=2 heads=2 model_dim=32 ffn_dim=64
                              // vocab=16 seq_len=8 filter_order=3
                              // gfsa_placement=all seed=42
  std::string task = "copy";  // copy | majority
  int epochs = 200;
  std::string out_dir = "out";
  int trials = 100;  // verify-bound style sweeps driven from a config
  int k_min = 2;
  int k_max = 10;

  static ExperimentConfig parse(std::istream& in, const std::string& source) {
    auto kv = detail::parse_kv(in, source);
    ExperimentConfig cfg;
    auto take = [&](const char* key) -> const detail::KvEntry* {
      auto it = kv.find(key);
      if (it == kv.end()) return nullptr;
      return &it->second;
    };
    auto as_int = [&](const detail::KvEntry* e, const char* key, int current) {
      if (!e) return current;
      const long long v = detail::parse_int(source, *e, key);
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw std::runtime_error(source + ":" + std::to_string(e->line) +
                                 ": key '" + key + "' out of range");
      return static_cast<int>(v);
    };

    cfg.model.layers = as_int(take("layers"), "layers", cfg.model.layers);
    cfg.model.heads = as_int(take("heads"), "heads", cfg.model.heads);
    cfg.model.model_dim = as_int(take("model_dim"), "model_dim", cfg.model.model_dim);
    cfg.model.ffn_dim = as_int(take("ffn_dim"), "ffn_dim", cfg.model.ffn_dim);
    cfg.model.vocab = as_int(take("vocab"), "vocab", cfg.model.vocab);
    cfg.model.seq_len = as_int(take("seq_len"), "seq_len", cfg.model.seq_len);
    cfg.model.filter_order =
        as_int(take("filter_order"), "filter_order", cfg.model.filter_order);
    if (const auto* e = take("gfsa_placement")) {
      try {
        cfg.model.placement = placement_from_name(e->value);
      } catch (const std::exception& ex) {
        throw std::runtime_error(source + ":" + std::to_string(e->line) + ": " +
                                 ex.what());
      }
    }
    if (const auto* e = take("seed"))
      cfg.model.seed = detail::parse_u64(source, *e, "seed");
    if (const auto* e = take("task")) cfg.task = e->value;
    cfg.epochs = as_int(take("epochs"), "epochs", cfg.epochs);
    if (const auto* e = take("out_dir")) cfg.out_dir = e->value;
    cfg.trials = as_int(take("trials"), "trials", cfg.trials);
    cfg.k_min = as_int(take("k_min"), "k_min", cfg.k_min);
    cfg.k_max = as_int(take("k_max"), "k_max", cfg.k_max);

    static const char* known[] = {"layers",       "heads",   "model_dim",
                                  "ffn_dim",      "vocab",   "seq_len",
                                  "filter_order", "gfsa_placement", "seed",
                                  "task",         "epochs",  "out_dir",
                                  "trials",       "k_min",   "k_max"};
    for (const auto& [key, entry] : kv) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok)
        throw std::runtime_error(source + ":" + std::to_string(entry.line) +
                                 ": unknown key '" + key + "'");
    }

    cfg.model.validate();
    if (cfg.task != "copy" && cfg.task != "majority") {
      const auto* e = take("task");
      throw std::runtime_error(source + ":" +
                               std::to_string(e ? e->line : 0) +
                               ": unknown task '" + cfg.task +
                               "', expected copy | majority");
    }
    if (cfg.epochs < 0)
      throw std::runtime_error(source + ": epochs must be >= 0");
    if (cfg.trials < 1)
      throw std::runtime_error(source + ": trials must be >= 1");
    if (cfg.k_min < 1 || cfg.k_max < cfg.k_min)
      throw std::runtime_error(source + ": need 1 <= k_min <= k_max");
    return cfg;
  }

  static ExperimentConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  std::string to_text() const {
    std::string s;
    s += "layers=" + std::to_string(model.layers) + "\n";
    s += "heads=" + std::to_string(model.heads) + "\n";
    s += "model_dim=" + std::to_string(model.model_dim) + "\n";
    s += "ffn_dim=" + std::to_string(model.ffn_dim) + "\n";
    s += "vocab=" + std::to_string(model.vocab) + "\n";
    s += "seq_len=" + std::to_string(model.seq_len) + "\n";
    s += "filter_order=" + std::to_string(model.filter_order) + "\n";
    s += "gfsa_placement=" + placement_name(model.placement) + "\n";
    s += "seed=" + std::to_string(model.seed) + "\n";
    s += "task=" + task + "\n";
    s += "epochs=" + std::to_string(epochs) + "\n";
    s += "out_dir=" + out_dir + "\n";
    s += "trials=" + std::to_string(trials) + "\n";
    s += "k_min=" + std::to_string(k_min) + "\n";
    s += "k_max=" + std::to_string(k_max) + "\n";
    return s;
  }
};

}  // namespace gfsa
