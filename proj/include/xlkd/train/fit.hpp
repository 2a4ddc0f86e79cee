// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xlkd/numeric/graph.hpp"
#include "xlkd/train/optim.hpp"

namespace xlkd::train {

struct TrainSettings {
  std::size_t epochs = 30;
  // Stop after this many epochs without a new best score; 0 disables.
  std::size_t patience = 10;
  std::size_t batch_size = 32;
  // Unset: pick one with lr_range_test.
  std::optional<double> lr;
  AdamWSettings adamw;
  uint64_t seed = 0;
  std::optional<double> clip_norm = 5.0;
  std::size_t range_batches = 100;

  nlohmann::json to_json() const;
  static TrainSettings from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double val_score = 0;
  double lr = 0;
};

struct FitResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_score = 0;
  double lr = 0;
  bool lr_fallback = false;
  std::size_t steps = 0;

  // One JSON object per line: {epoch, loss, val_score, lr}.
  std::string log_jsonl() const;
};

// Mean loss of one mini-batch given indices into the training set.
using BatchLoss = std::function<numeric::Var(numeric::Graph&, std::span<const std::size_t>)>;
// Higher is better.
using Validator = std::function<double()>;

struct RangeTest {
  double lr = 1e-3;
  bool fallback = false;
  std::vector<double> lrs;
  std::vector<double> losses;
  std::vector<double> smoothed;
};

inline constexpr double kFallbackLr = 1e-3;

// Smooths a recorded sweep (EMA, beta 0.9, bias-corrected) and picks the lr
// where the smoothed loss falls fastest after the first tenth of the sweep,
// divided by 10. `steps` is the planned sweep length.
RangeTest pick_range_lr(std::vector<double> lrs, std::vector<double> losses, std::size_t steps);

// Exponential sweep from 1e-6 to 1e-1 over settings.range_batches steps on a
// scratch copy of the parameters (restored afterwards). Picks the lr where
// the smoothed loss falls fastest, divided by 10.
RangeTest lr_range_test(std::vector<Parameter>& params, std::size_t num_examples, const BatchLoss& loss,
                        const TrainSettings& settings, std::string_view job);

// Epoch loop with seeded shuffling; restores the parameters of the epoch with
// the highest validation score (earliest on ties).
FitResult fit(std::vector<Parameter>& params, std::size_t num_examples, const BatchLoss& loss,
              const Validator& validate, const TrainSettings& settings, std::string_view job);

}  // namespace xlkd::train
