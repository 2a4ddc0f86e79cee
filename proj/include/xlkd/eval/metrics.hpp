// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xlkd/models/predictions.hpp"
#include "xlkd/synthlang/corpus.hpp"

namespace xlkd::eval {

using models::PredictionSet;
using synthlang::Corpus;

// Fraction of examples whose argmax equals the gold intent. Reads labels
// through the corpus gate; ids must line up.
double accuracy(const PredictionSet& predictions, const Corpus& gold);

struct SpanScores {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision() const;
  double recall() const;
  double f1() const;
};

// Micro-averaged exact-match span scores after BIO repair.
SpanScores span_f1(std::span<const std::vector<std::string>> predicted, std::span<const std::vector<std::string>> gold);
SpanScores span_f1(const PredictionSet& predictions, const Corpus& gold);

// Argmax tag sequences of a word-task prediction set.
std::vector<std::vector<std::string>> predicted_tags(const PredictionSet& predictions);

struct MetricsRow {
  std::string model;
  std::string task;
  // Target-language scores in [0, 1].
  std::map<std::string, double> scores;
  std::optional<double> source_score;

  // Mean over target languages only.
  double average() const;
};

struct Delta {
  std::map<std::string, double> per_language;
  double average = 0;
};

// stage2 - stage1, per language and on the target average.
Delta dissipation_delta(const MetricsRow& stage1, const MetricsRow& stage2);

}  // namespace xlkd::eval
