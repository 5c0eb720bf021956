#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gfsa/checkpoint.hpp"
#include "gfsa/config.hpp"
#include "gfsa/model.hpp"
#include "gfsa/tasks.hpp"
#include "gfsa/train.hpp"
#include "gtest/gtest.h"

namespace {

namespace fs = std::filesystem;
using gfsa::ExperimentConfig;
using gfsa::ModelConfig;
using gfsa::Placement;
using gfsa::TrainState;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("gfsa_cfg_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ExperimentConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return ExperimentConfig::parse(in, "test.cfg");
}

void expect_parse_error(const std::string& text, const std::string& needle) {
  try {
    parse_text(text);
    FAIL() << "expected parse to fail, needle: " << needle;
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << "message was: " << e.what();
  }
}

TEST(ConfigParseTest, EmptyInputYieldsDefaults) {
  const ExperimentConfig cfg = parse_text("");
  EXPECT_EQ(cfg.model.layers, 2);
  EXPECT_EQ(cfg.model.heads, 2);
  EXPECT_EQ(cfg.model.model_dim, 32);
  EXPECT_EQ(cfg.model.ffn_dim, 64);
  EXPECT_EQ(cfg.model.vocab, 16);
  EXPECT_EQ(cfg.model.seq_len, 8);
  EXPECT_EQ(cfg.model.filter_order, 3);
  EXPECT_EQ(cfg.model.placement, Placement::kAll);
  EXPECT_EQ(cfg.model.seed, 42u);
  EXPECT_EQ(cfg.task, "copy");
  EXPECT_EQ(cfg.epochs, 200);
  EXPECT_EQ(cfg.out_dir, "out");
  EXPECT_EQ(cfg.trials, 100);
  EXPECT_EQ(cfg.k_min, 2);
  EXPECT_EQ(cfg.k_max, 10);
}

TEST(ConfigParseTest, ReadsEveryKey) {
  const ExperimentConfig cfg = parse_text(
      "layers=4\n"
      "heads=4\n"
      "model_dim=64\n"
      "ffn_dim=128\n"
      "vocab=32\n"
      "seq_len=16\n"
      "filter_order=5\n"
      "gfsa_placement=even_only\n"
      "seed=1234567890123\n"
      "task=majority\n"
      "epochs=50\n"
      "out_dir=results/run1\n"
      "trials=7\n"
      "k_min=1\n"
      "k_max=4\n");
  EXPECT_EQ(cfg.model.layers, 4);
  EXPECT_EQ(cfg.model.heads, 4);
  EXPECT_EQ(cfg.model.model_dim, 64);
  EXPECT_EQ(cfg.model.ffn_dim, 128);
  EXPECT_EQ(cfg.model.vocab, 32);
  EXPECT_EQ(cfg.model.seq_len, 16);
  EXPECT_EQ(cfg.model.filter_order, 5);
  EXPECT_EQ(cfg.model.placement, Placement::kEvenOnly);
  EXPECT_EQ(cfg.model.seed, 1234567890123ull);
  EXPECT_EQ(cfg.task, "majority");
  EXPECT_EQ(cfg.epochs, 50);
  EXPECT_EQ(cfg.out_dir, "results/run1");
  EXPECT_EQ(cfg.trials, 7);
  EXPECT_EQ(cfg.k_min, 1);
  EXPECT_EQ(cfg.k_max, 4);
}

TEST(ConfigParseTest, ToleratesCommentsBlanksAndPadding) {
  const ExperimentConfig cfg = parse_text(
      "# experiment setup\n"
      "\n"
      "  layers = 3  \r\n"
      "\t heads\t=\t1 \n"
      "   # trailing comment line\n"
      "model_dim=8\n");
  EXPECT_EQ(cfg.model.layers, 3);
  EXPECT_EQ(cfg.model.heads, 1);
  EXPECT_EQ(cfg.model.model_dim, 8);
}

TEST(ConfigParseTest, ErrorsNameTheSourceLine) {
  expect_parse_error("layers=2\nwat=9\n", "test.cfg:2: unknown key 'wat'");
  expect_parse_error("layers=2\nlayers=3\n",
                     "test.cfg:2: duplicate key 'layers' (first at line 1)");
  expect_parse_error("layers\n", "test.cfg:1: expected key=value");
  expect_parse_error("=5\n", "test.cfg:1: empty key");
  expect_parse_error("layers=abc\n", "test.cfg:1: key 'layers' needs an integer");
  expect_parse_error("layers=3x\n", "test.cfg:1: key 'layers' needs an integer");
  expect_parse_error("layers=99999999999999\n", "test.cfg:1: key 'layers' out of range");
  expect_parse_error("seed=-4\n", "needs an unsigned integer");
  expect_parse_error("\n\ngfsa_placement=sometimes\n",
                     "test.cfg:3: unknown gfsa_placement 'sometimes'");
  expect_parse_error("task=sort\n", "test.cfg:1: unknown task 'sort'");
  expect_parse_error("epochs=-1\n", "epochs must be >= 0");
  expect_parse_error("trials=0\n", "trials must be >= 1");
  expect_parse_error("k_min=0\n", "need 1 <= k_min <= k_max");
  expect_parse_error("k_min=5\nk_max=4\n", "need 1 <= k_min <= k_max");
}

TEST(ConfigParseTest, ModelValidationStillApplies) {
  // heads must divide model_dim; the shape check comes from the model itself.
  EXPECT_THROW(parse_text("heads=3\n"), std::invalid_argument);
  EXPECT_THROW(parse_text("vocab=1\n"), std::invalid_argument);
}

TEST(ConfigParseTest, TextRoundTripPreservesEveryField) {
  ExperimentConfig cfg;
  cfg.model.layers = 6;
  cfg.model.heads = 2;
  cfg.model.model_dim = 16;
  cfg.model.ffn_dim = 24;
  cfg.model.vocab = 9;
  cfg.model.seq_len = 11;
  cfg.model.filter_order = 4;
  cfg.model.placement = Placement::kNone;
  cfg.model.seed = 77;
  cfg.task = "majority";
  cfg.epochs = 13;
  cfg.out_dir = "deep/dir";
  cfg.trials = 3;
  cfg.k_min = 2;
  cfg.k_max = 6;

  const std::string text = cfg.to_text();
  const ExperimentConfig back = parse_text(text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.model.placement, Placement::kNone);
  EXPECT_EQ(back.model.seed, 77u);
  EXPECT_EQ(back.task, "majority");
  EXPECT_EQ(back.out_dir, "deep/dir");
}

TEST(ConfigParseTest, MissingFileNamesThePath) {
  try {
    ExperimentConfig::parse_file("/nonexistent/cfg/path.cfg");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("cannot open config file"),
              std::string::npos);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/cfg/path.cfg"),
              std::string::npos);
  }
}

ModelConfig checkpoint_config() {
  ModelConfig cfg;
  cfg.layers = 3;
  cfg.heads = 2;
  cfg.model_dim = 8;
  cfg.ffn_dim = 12;
  cfg.vocab = 6;
  cfg.seq_len = 4;
  cfg.filter_order = 2;
  cfg.placement = Placement::kEvenOnly;
  cfg.seed = 99;
  return cfg;
}

TEST(CheckpointTest, SaveLoadRoundTripsBitForBit) {
  TempDir tmp;
  const ModelConfig cfg = checkpoint_config();
  TrainState state = gfsa::init_state(cfg);
  const gfsa::TaskSpec task = gfsa::make_copy_task(cfg.vocab, cfg.seq_len, 5);
  const gfsa::Batch batch = gfsa::make_batch(task, 4);
  gfsa::train_step(state, batch);
  gfsa::train_step(state, batch);

  gfsa::save_checkpoint(state, "copy", tmp.path / "ck");
  const gfsa::Checkpoint loaded = gfsa::load_checkpoint(tmp.path / "ck");

  EXPECT_EQ(loaded.task, "copy");
  EXPECT_EQ(loaded.state.step, 2);
  const ModelConfig& got = loaded.state.cfg;
  EXPECT_EQ(got.layers, cfg.layers);
  EXPECT_EQ(got.heads, cfg.heads);
  EXPECT_EQ(got.model_dim, cfg.model_dim);
  EXPECT_EQ(got.ffn_dim, cfg.ffn_dim);
  EXPECT_EQ(got.vocab, cfg.vocab);
  EXPECT_EQ(got.seq_len, cfg.seq_len);
  EXPECT_EQ(got.filter_order, cfg.filter_order);
  EXPECT_EQ(got.placement, cfg.placement);
  EXPECT_EQ(got.seed, cfg.seed);

  auto want = gfsa::param_refs(state);
  TrainState loaded_state = loaded.state;
  auto have = gfsa::param_refs(loaded_state);
  ASSERT_EQ(want.size(), have.size());
  for (std::size_t p = 0; p < want.size(); ++p)
    EXPECT_EQ(gfsa::max_abs_diff(*want[p].mat, *have[p].mat), 0.0)
        << want[p].name;

  // Optimizer moments restart at zero by design.
  for (const auto& m : loaded.state.adam_m) EXPECT_EQ(gfsa::max_abs(m), 0.0);
  for (const auto& m : loaded.state.adam_v) EXPECT_EQ(gfsa::max_abs(m), 0.0);
}

TEST(CheckpointTest, MissingManifestOrKeyIsDiagnosed) {
  TempDir tmp;
  try {
    gfsa::load_checkpoint(tmp.path / "nope");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("cannot open checkpoint manifest"),
              std::string::npos);
  }

  const fs::path dir = tmp.path / "partial";
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.txt") << "layers=1\nheads=1\n";
  try {
    gfsa::load_checkpoint(dir);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("missing key"), std::string::npos);
  }
}

TEST(CheckpointTest, ShapeMismatchNamesTheParameter) {
  TempDir tmp;
  const ModelConfig cfg = checkpoint_config();
  TrainState state = gfsa::init_state(cfg);
  gfsa::save_checkpoint(state, "copy", tmp.path / "ck");

  // Overwrite one parameter file with the wrong shape.
  gfsa::write_matrix(gfsa::DenseMatrix(2, 2, 1.0),
                     (tmp.path / "ck" / "positional.mat").string());
  try {
    gfsa::load_checkpoint(tmp.path / "ck");
    FAIL();
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("positional"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
  }

  fs::remove(tmp.path / "ck" / "positional.mat");
  EXPECT_THROW(gfsa::load_checkpoint(tmp.path / "ck"), std::runtime_error);
}

}  // namespace
