#include "gfsa/tasks.hpp"

#include <algorithm>
#include <map>
#include <vector>

#include "gtest/gtest.h"

namespace {

using gfsa::Batch;
using gfsa::TaskSpec;

// Independent mode computation used to re-check generated labels.
int mode_smallest(const std::vector<int>& xs) {
  std::map<int, int> counts;
  for (int x : xs) ++counts[x];
  int best = xs[0], best_count = 0;
  for (const auto& [tok, cnt] : counts)
    if (cnt > best_count) {  // map iterates ascending, ties keep smallest
      best = tok;
      best_count = cnt;
    }
  return best;
}

TEST(CopyTaskTest, TargetIsOneStepRotation) {
  const std::vector<int> input = {3, 1, 4, 1};
  const std::vector<int> want = {1, 3, 1, 4};
  EXPECT_EQ(gfsa::copy_labels(input), want);
}

TEST(CopyTaskTest, EveryPositionEchoesItsLeftNeighbor) {
  const TaskSpec task = gfsa::make_copy_task(16, 8, 99);
  const Batch b = gfsa::make_batch(task, 50);
  for (std::size_t s = 0; s < b.size(); ++s)
    for (std::size_t i = 0; i < 8; ++i)
      EXPECT_EQ(b.targets[s][(i + 1) % 8], b.inputs[s][i]);
}

TEST(MajorityTaskTest, AllIdenticalSequenceLabelsItself) {
  const std::vector<int> input = {5, 5, 5, 5};
  const std::vector<int> labels = gfsa::majority_labels(input, 8);
  for (int l : labels) EXPECT_EQ(l, 5);
}

TEST(MajorityTaskTest, TiesGoToSmallestToken) {
  const std::vector<int> labels = gfsa::majority_labels({7, 2, 7, 2}, 8);
  for (int l : labels) EXPECT_EQ(l, 2);
}

TEST(MajorityTaskTest, LabelsAreConstantAcrossPositions) {
  const TaskSpec task = gfsa::make_majority_task(8, 6, 123);
  const Batch b = gfsa::make_batch(task, 40);
  for (std::size_t s = 0; s < b.size(); ++s)
    for (std::size_t i = 1; i < 6; ++i)
      EXPECT_EQ(b.targets[s][i], b.targets[s][0]);
}

TEST(BatchTest, LabelsSurviveIndependentRederivation) {
  const TaskSpec copy = gfsa::make_copy_task(16, 8, 7);
  const Batch cb = gfsa::make_batch(copy, 100);
  for (std::size_t s = 0; s < cb.size(); ++s)
    EXPECT_EQ(cb.targets[s], gfsa::copy_labels(cb.inputs[s]));

  const TaskSpec maj = gfsa::make_majority_task(8, 7, 7);
  const Batch mb = gfsa::make_batch(maj, 100);
  for (std::size_t s = 0; s < mb.size(); ++s)
    for (int label : mb.targets[s])
      EXPECT_EQ(label, mode_smallest(mb.inputs[s]));
}

TEST(BatchTest, GenerationIsDeterministicPerSeed) {
  const TaskSpec task = gfsa::make_copy_task(16, 8, 42);
  const Batch a = gfsa::make_batch(task, 20);
  const Batch b = gfsa::make_batch(task, 20);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.targets, b.targets);

  const Batch c = gfsa::make_batch_seeded(task, 20, 43);
  EXPECT_NE(a.inputs, c.inputs);
}

TEST(BatchTest, TokensStayInVocabulary) {
  const TaskSpec task = gfsa::make_copy_task(5, 9, 1);
  const Batch b = gfsa::make_batch(task, 200);
  for (const auto& row : b.inputs)
    for (int id : row) {
      EXPECT_GE(id, 0);
      EXPECT_LT(id, 5);
    }
}

TEST(TaskSpecTest, ValidationAndDispatch) {
  EXPECT_THROW(gfsa::make_copy_task(1, 8, 0), std::invalid_argument);
  EXPECT_THROW(gfsa::make_copy_task(4, 1, 0), std::invalid_argument);
  EXPECT_THROW(gfsa::make_majority_task(1, 8, 0), std::invalid_argument);
  EXPECT_THROW(gfsa::make_task("sort", 8, 8, 0), std::invalid_argument);
  EXPECT_EQ(gfsa::make_task("copy", 8, 8, 0).name, "copy");
  EXPECT_EQ(gfsa::make_task("majority", 8, 8, 0).name, "majority");
  const TaskSpec task = gfsa::make_copy_task(8, 8, 0);
  EXPECT_THROW(gfsa::make_batch(task, 0), std::invalid_argument);
}

}  // namespace
