// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlkd/eval/metrics.hpp"

namespace xlkd::eval {

// Report sections, in rendering order.
enum class RowGroup { kSource, kReference, kBaseline, kOurs };

struct ReportRow {
  RowGroup group = RowGroup::kOurs;
  std::string label;  // e.g. "2-step KD", "Translate-test"
  std::string source_arch;
  std::string target_arch;
  int pivot_size = -1;  // -1 when no pivot is involved
  MetricsRow metrics;
  // Pivot scores after the first step, when the row has one.
  std::optional<MetricsRow> stage1;

  std::string key() const;
  nlohmann::ordered_json to_json() const;
  static ReportRow from_json(const nlohmann::json& j);
};

inline constexpr std::array<const char*, 3> kArchOrder = {"transformer", "bilstm", "cnn"};

// Source-architecture rows by target-architecture columns of target-average
// scores, plus the drop from each source model's own source-language score.
struct TransferGrid {
  std::string task;
  int pivot_size = 0;
  std::array<std::array<std::optional<double>, 3>, 3> score;
  std::array<std::array<std::optional<double>, 3>, 3> drop;

  bool empty() const;
  std::size_t populated() const;
  std::string to_csv() const;
};

// Collects the plain 2-step KD rows of one task and pivot size.
TransferGrid build_grid(const std::vector<ReportRow>& rows, const std::string& task, int pivot_size);

struct ExperimentReport {
  std::vector<std::string> languages;  // target languages, sorted
  std::vector<ReportRow> rows;         // in rendering order
  std::vector<TransferGrid> grids;     // non-empty only

  nlohmann::ordered_json to_json() const;
  std::string markdown() const;
  // All grids, one block per (task, pivot size); empty when there are none.
  std::string grid_csv() const;
};

// Sorts rows into a fixed order: group, then label rank, then source and
// target architecture, then pivot size. Drops empty grids.
ExperimentReport build_report(std::vector<ReportRow> rows, std::vector<TransferGrid> grids);

}  // namespace xlkd::eval
