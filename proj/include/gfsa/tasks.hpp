#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/model.hpp"
#include "gfsa/rng.hpp"

namespace gfsa {

// Synthetic sequence tasks over token ids [0, vocab).
//
//   copy     position i must emit the token one slot to its left, wrapping
//            at the start (a one-step rotation; solvable only through
//            attention plus positions).
//   majority every position must emit the most frequent token of the
//            sequence; ties go to the smallest token id.
struct TaskSpec {
  std::string name;
  int vocab = 16;
  int seq_len = 8;
  std::uint64_t seed = 42;
};

inline TaskSpec make_copy_task(int vocab, int seq_len, std::uint64_t seed) {
  if (vocab < 2) throw std::invalid_argument("copy task: vocab must be >= 2");
  if (seq_len < 2) throw std::invalid_argument("copy task: seq_len must be >= 2");
  return TaskSpec{"copy", vocab, seq_len, seed};
}

inline TaskSpec make_majority_task(int vocab, int seq_len, std::uint64_t seed) {
  if (vocab < 2) throw std::invalid_argument("majority task: vocab must be >= 2");
  if (seq_len < 2) throw std::invalid_argument("majority task: seq_len must be >= 2");
  return TaskSpec{"majority", vocab, seq_len, seed};
}

inline TaskSpec make_task(const std::string& name, int vocab, int seq_len,
                          std::uint64_t seed) {
  if (name == "copy") return make_copy_task(vocab, seq_len, seed);
  if (name == "majority") return make_majority_task(vocab, seq_len, seed);
  throw std::invalid_argument("unknown task '" + name +
                              "', expected copy | majority");
}

inline std::vector<int> copy_labels(const std::vector<int>& input) {
  const std::size_t n = input.size();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = input[(i + n - 1) % n];
  return out;
}

inline std::vector<int> majority_labels(const std::vector<int>& input, int vocab) {
  std::vector<int> count(static_cast<std::size_t>(vocab), 0);
  for (int id : input) ++count[static_cast<std::size_t>(id)];
  int best = 0;
  for (int t = 1; t < vocab; ++t)
    if (count[static_cast<std::size_t>(t)] > count[static_cast<std::size_t>(best)])
      best = t;  // strict > keeps the smallest id on ties
  return std::vector<int>(input.size(), best);
}

// Deterministic: the same spec and seed always produce the same batch.
inline Batch make_batch_seeded(const TaskSpec& task, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("make_batch: count must be >= 1");
  Rng rng(seed);
  Batch b;
  b.inputs.reserve(count);
  b.targets.reserve(count);
  for (int s = 0; s < count; ++s) {
    std::vector<int> input(static_cast<std::size_t>(task.seq_len));
    for (int& id : input)
      id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(task.vocab)));
    if (task.name == "copy") {
      b.targets.push_back(copy_labels(input));
    } else if (task.name == "majority") {
      b.targets.push_back(majority_labels(input, task.vocab));
    } else {
      throw std::invalid_argument("unknown task '" + task.name + "'");
    }
    b.inputs.push_back(std::move(input));
  }
  return b;
}

inline Batch make_batch(const TaskSpec& task, int count) {
  return make_batch_seeded(task, count, task.seed);
}

}  // namespace gfsa
