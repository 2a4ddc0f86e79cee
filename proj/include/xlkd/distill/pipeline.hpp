// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlkd/distill/kd.hpp"
#include "xlkd/synthlang/language.hpp"

namespace xlkd::distill {

using synthlang::LanguageSet;

struct StageResult {
  EncoderModel model;
  train::FitResult fit;
};

struct PipelineOptions {
  bool balanced = false;
  bool augment = false;
};

// Unlabeled corpora seen by the transfer path.
struct TransferData {
  Corpus src;
  Corpus src_validation;
  std::map<std::string, Corpus> tgt;
  std::map<std::string, Corpus> tgt_validation;
};

// The source model with its tokenizer; the teacher of KD-(1).
struct SourceModel {
  const EncoderModel& model;
  const SubwordVocab& vocab;
};

// Pretrained pivot weights with the shared vocabulary.
struct Pivot {
  const EncoderModel& pretrained;
  const SubwordVocab& vocab;
};

struct TargetSpec {
  models::ArchConfig arch;  // labels are filled in from the task
  std::map<std::string, const SubwordVocab*> vocabs;
};

// KD-(1): source model -> pivot on the source corpus. With `translated`
// (balanced distillation) the translated copies join the training set and
// reuse the source-side teacher rows of their origin.
StageResult kd_stage1(const SourceModel& source, const Pivot& pivot, Task task, const TransferData& data,
                      const std::vector<Corpus>& translated, const train::TrainSettings& settings,
                      std::string_view job);

// KD-(2): pivot -> fresh target model on one target language, optionally
// mixed 1:1 with paraphrases of the same corpus.
StageResult kd_stage2(const EncoderModel& pivot, const SubwordVocab& pivot_vocab, Task task,
                      const models::ArchConfig& target_arch, const SubwordVocab& target_vocab, const Corpus& tgt,
                      const Corpus& tgt_validation, const std::optional<Corpus>& paraphrases,
                      const train::TrainSettings& settings, std::string_view job);

struct PipelineResult {
  StageResult stage1;
  std::map<std::string, StageResult> stage2;
  nlohmann::ordered_json manifest;
};

PipelineResult freetransfer_pipeline(const LanguageSet& langs, const SourceModel& source, const Pivot& pivot,
                                     const TargetSpec& target, Task task, const TransferData& data,
                                     const PipelineOptions& options, const train::TrainSettings& settings,
                                     std::string_view job);

// Runs KD-(2) for every target language from a given stage-1 pivot.
std::map<std::string, StageResult> transfer_to_targets(const LanguageSet& langs, const EncoderModel& stage1,
                                                       const SubwordVocab& pivot_vocab, const TargetSpec& target,
                                                       Task task, const TransferData& data, bool augment,
                                                       const train::TrainSettings& settings, std::string_view job);

struct TranslateTestResult {
  PredictionSet predictions;  // keyed by the target example ids
  std::size_t passes_per_example = 2;
};

// Translates the target corpus into the source language and runs the source
// model there. Word-task tags come back through the word alignment.
TranslateTestResult translate_test(const LanguageSet& langs, const SourceModel& source, const Corpus& target,
                                   Task task);

// Source-model argmax labels on the source corpus, carried over to the
// translated copy and used as one-hot targets for a fresh target model.
StageResult translate_train_pseudo(const LanguageSet& langs, const SourceModel& source, const TransferData& data,
                                   const std::string& lang, const models::ArchConfig& target_arch,
                                   const SubwordVocab& target_vocab, Task task, const train::TrainSettings& settings,
                                   std::string_view job);

// Stage 1 of the gold-supervised reference: the pivot trained with
// cross-entropy on labeled source data. Reads gold labels by design.
StageResult gold_supervised_stage1(const Pivot& pivot, const Corpus& annotated, const Corpus& validation, Task task,
                                   std::span<const std::string> categories, const train::TrainSettings& settings,
                                   std::string_view job);

// One-hot rows for hard labels.
std::vector<double> one_hot(std::span<const int> labels, std::size_t categories);

// SHA-256 of the corpus as written (no labels for unlabeled views).
std::string corpus_hash(const Corpus& corpus);

}  // namespace xlkd::distill
