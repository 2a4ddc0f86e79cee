// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "xlkd/models/config.hpp"
#include "xlkd/synthlang/benchmark.hpp"
#include "xlkd/train/fit.hpp"
#include "xlkd/train/supervised.hpp"

namespace xlkd::cli {

struct PivotSettings {
  int size = 0;  // 0 or 1, see models::pivot_config
  std::size_t sentences_per_language = 2000;
  std::size_t heldout = 400;
  train::PretrainSettings pretrain;
};

// One JSON document. Every seed in a run is derived from `seed`.
struct RunConfig {
  uint64_t seed = 1;
  std::filesystem::path languages = "configs/synthlang.json";
  bool reorder = true;  // false: every language keeps source word order
  synthlang::SplitSizes data;
  std::size_t vocab_size = 500;         // per-language subword vocabularies
  std::size_t shared_vocab_size = 400;  // pivot vocabulary
  models::Task task = models::Task::kSentence;
  models::Family arch = models::Family::kTransformer;
  models::Family target_arch = models::Family::kTransformer;
  bool balanced = false;
  bool augment = false;
  PivotSettings pivot;
  train::TrainSettings train;
  std::filesystem::path out = "runs/default";

  nlohmann::ordered_json to_json() const;
  // Unknown keys are schema errors. A relative `languages` path resolves
  // against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  // SHA-256 of the settings every command in a run directory shares. The
  // per-command selections (task, architectures, pipeline options, pivot
  // size) and `out` are left out; job records carry those.
  std::string hash() const;
};

}  // namespace xlkd::cli
