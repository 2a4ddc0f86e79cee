// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlkd/cli/config.hpp"
#include "xlkd/common/error.hpp"
#include "xlkd/distill/pipeline.hpp"
#include "xlkd/eval/report.hpp"

namespace xlkd::cli {

using models::EncoderModel;
using models::Family;
using models::Task;
using tokenize::SubwordVocab;

// Thrown when a command finished with label reads it was not allowed.
class GateViolation : public Error {
 public:
  using Error::Error;
};

struct GateCounts {
  uint64_t successful = 0;  // all non-test splits
  uint64_t unannotated = 0;  // unannotated_train splits only
  uint64_t denied = 0;
};

// Everything a command produced: the report row plus a job record with
// hashes, fit summaries, and label-gate counters for the command.
struct CommandResult {
  std::vector<eval::ReportRow> rows;
  nlohmann::ordered_json record;
  GateCounts gate;
};

// The artifacts of one run directory. Models, vocabularies and data are
// loaded from disk when present and produced (and saved) otherwise, so a
// rerun rewrites identical bytes.
class Workspace {
 public:
  explicit Workspace(RunConfig config);

  const RunConfig& config() const { return config_; }
  const synthlang::LanguageSet& languages() const { return *langs_; }
  const std::filesystem::path& out() const { return config_.out; }

  // Writes data/<lang>/<split>.jsonl and data/manifest.json.
  nlohmann::ordered_json gen_data();

  CommandResult train_source(Task task, Family arch);
  CommandResult pipeline(Task task, Family arch, Family target_arch, const distill::PipelineOptions& options,
                         int pivot_size);
  // All 3 x 3 source/target pairs with the plain options.
  CommandResult pipeline_grid(Task task, int pivot_size);
  CommandResult translate_test(Task task, Family arch);
  CommandResult translate_train_pseudo(Task task, Family arch, Family target_arch);
  CommandResult gold_supervised(Task task, Family target_arch, int pivot_size);

  // Scores a saved model on the labeled test split of `lang`.
  double evaluate(const std::filesystem::path& model_path, const std::string& lang, Task task);
  double evaluate(const EncoderModel& model, const SubwordVocab& vocab, const std::string& lang, Task task);

  // Collects rows/ into report.json, report.md and grid.csv.
  eval::ExperimentReport report();

  const synthlang::Benchmark& benchmark();
  const SubwordVocab& vocab(const std::string& lang);
  const SubwordVocab& shared_vocab();
  const EncoderModel& pivot(int size);
  // Loads a model written by train_source; throws if there is none.
  const EncoderModel& source(Task task, Family arch);
  // Stage-1 pivot for a source architecture, distilled on demand.
  const distill::StageResult& stage1(Task task, Family arch, bool balanced, int pivot_size);

  // Argmax agreement of a stage-1 pivot with its teacher on the unlabeled
  // source test split.
  double kd1_agreement(Task task, Family arch, bool balanced, int pivot_size);

  GateCounts gate() const;
  // Progress lines go here; stderr by default.
  void set_log(std::function<void(const std::string&)> log) { log_ = std::move(log); }
  // Rewrites manifest.json: config, its hash, and the sha256 of every file.
  void write_manifest() const;

 private:
  std::filesystem::path path(const std::string& rel) const { return config_.out / rel; }
  train::TrainSettings settings() const;
  distill::TransferData transfer_data();
  distill::TargetSpec target_spec(Task task, Family arch);
  const std::vector<std::string>& categories(Task task) const;
  eval::MetricsRow score_targets(const std::string& name, Task task,
                                 const std::map<std::string, const EncoderModel*>& models, bool shared);
  void save_row(const eval::ReportRow& row, const nlohmann::ordered_json& record);
  // Runs `body` and checks the label gate: only `allowed` splits (lang/split)
  // may see successful reads besides test splits.
  CommandResult guarded(const std::string& what, const std::vector<std::string>& allowed,
                        const std::function<CommandResult()>& body);

  RunConfig config_;
  std::unique_ptr<synthlang::LanguageSet> langs_;
  std::vector<std::string> intents_, slots_;
  std::optional<synthlang::Benchmark> bench_;
  std::map<std::string, SubwordVocab> vocabs_;
  std::optional<SubwordVocab> shared_;
  std::map<int, EncoderModel> pivots_;
  std::map<std::string, EncoderModel> sources_;
  std::map<std::string, distill::StageResult> stage1_;
  std::function<void(const std::string&)> log_;
};

// Lowercase alphanumerics; every other run of characters becomes one '-'.
std::string slug(const std::string& text);

}  // namespace xlkd::cli
