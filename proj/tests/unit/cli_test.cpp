// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "xlkd/cli/workspace.hpp"
#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"

namespace xlkd::cli {
namespace {

namespace fs = std::filesystem;
using models::Family;
using models::Task;

RunConfig tiny(const fs::path& out) {
  RunConfig c = RunConfig::load(std::string(XLKD_SOURCE_DIR) + "/configs/run_default.json");
  c.out = out;
  c.data = {80, 80, 50, 50};
  c.vocab_size = 200;
  c.shared_vocab_size = 200;
  c.pivot.sentences_per_language = 150;
  c.pivot.heldout = 50;
  c.pivot.pretrain.steps = 20;
  c.train.epochs = 2;
  c.train.patience = 0;
  c.train.range_batches = 10;
  return c;
}

TEST(Config, RejectsUnknownKeysAndRoundTrips) {
  RunConfig c = tiny("runs/x");
  nlohmann::json j = nlohmann::json::parse(c.to_json().dump());
  EXPECT_EQ(nlohmann::json::parse(RunConfig::from_json(j, XLKD_SOURCE_DIR).to_json().dump()), j);
  j["pivot"]["stepz"] = 3;
  EXPECT_THROW(RunConfig::from_json(j, XLKD_SOURCE_DIR), SchemaError);
}

TEST(Workspace, TasksKeepSeparateArtifacts) {
  const fs::path out = fs::temp_directory_path() / "xlkd_cli_test";
  fs::remove_all(out);
  Workspace ws(tiny(out));
  ws.set_log([](const std::string&) {});
  ws.gen_data();
  ws.train_source(Task::kSentence, Family::kCnn);
  ws.train_source(Task::kWord, Family::kCnn);
  // Same label and architectures for both tasks: names must still differ.
  CommandResult s = ws.pipeline(Task::kSentence, Family::kCnn, Family::kCnn, {}, 0);
  CommandResult w = ws.pipeline(Task::kWord, Family::kCnn, Family::kCnn, {}, 0);
  CommandResult sp = ws.translate_train_pseudo(Task::kSentence, Family::kCnn, Family::kCnn);
  CommandResult wp = ws.translate_train_pseudo(Task::kWord, Family::kCnn, Family::kCnn);
  EXPECT_EQ(s.rows.front().metrics.task, "sentence");
  EXPECT_EQ(w.rows.front().metrics.task, "word");
  std::size_t model_dirs = 0;
  for (const auto& e : fs::directory_iterator(out / "models")) model_dirs += e.is_directory();
  EXPECT_EQ(model_dirs, 4u);
  for (const auto& lang : ws.languages().targets()) {
    const auto sentence = read_file(out / "models/sentence-2-step-kd-cnn-cnn-pivot0" / (lang + ".json"));
    const auto word = read_file(out / "models/word-2-step-kd-cnn-cnn-pivot0" / (lang + ".json"));
    EXPECT_NE(sentence, word) << lang;
  }
  // A rerun on the same directory loads what is there and scores the same.
  Workspace again(tiny(out));
  again.set_log([](const std::string&) {});
  EXPECT_EQ(again.pipeline(Task::kWord, Family::kCnn, Family::kCnn, {}, 0).rows.front().to_json(),
            w.rows.front().to_json());
  EXPECT_EQ(s.gate.successful + w.gate.successful + sp.gate.successful + wp.gate.successful, 0u);

  RunConfig other = tiny(out);
  other.seed = 99;
  EXPECT_THROW(Workspace{other}, SchemaError);
  fs::remove_all(out);
}

}  // namespace
}  // namespace xlkd::cli
