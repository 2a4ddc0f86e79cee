// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "xlkd/models/model.hpp"
#include "xlkd/synthlang/corpus.hpp"
#include "xlkd/tokenize/bpe.hpp"
#include "xlkd/train/fit.hpp"

namespace xlkd::train {

using models::EncoderModel;
using models::Task;
using tokenize::Tokenization;

// Category indices per example: one for the sentence task, one per word for
// the word task.
using Targets = std::vector<std::vector<int>>;

// Reads gold labels through the corpus gate.
Targets gold_targets(const synthlang::Corpus& corpus, Task task, std::span<const std::string> categories);

// Cross-entropy on hard targets, mean over rows.
FitResult train_supervised(EncoderModel& model, std::span<const Tokenization> inputs, const Targets& targets, Task task,
                           const Validator& validate, const TrainSettings& settings, std::string_view job);

struct PretrainSettings {
  std::size_t steps = 1500;
  std::size_t batch_size = 32;
  double lr = 2e-3;
  double mask_rate = 0.15;
  AdamWSettings adamw;
  uint64_t seed = 0;
};

struct PretrainResult {
  EncoderModel model;
  // Mean masked-token loss per block of 50 steps.
  std::vector<double> losses;
  // Fraction of masked positions predicted exactly on the held-out inputs.
  double masked_accuracy = 0;
};

// Masked-token pretraining over the pooled inputs of every language. The
// last `heldout` inputs are kept out of training and scored at the end.
PretrainResult pivot_pretrain(const models::ArchConfig& config, std::span<const Tokenization> inputs,
                              std::size_t heldout, const PretrainSettings& settings);

// Replaces each non-bos subword with the mask token with probability `rate`,
// at least one per input. Returns (position, original id) pairs.
std::vector<std::pair<std::size_t, int>> mask_tokens(Tokenization& tok, double rate, Rng& rng);

}  // namespace xlkd::train
