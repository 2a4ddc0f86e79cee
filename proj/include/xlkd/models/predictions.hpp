// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "xlkd/models/config.hpp"

namespace xlkd::models {

// Class distributions per example: one row (sentence task) or one row per
// word taken at its first subword (word task).
struct PredictionSet {
  Task task = Task::kSentence;
  std::vector<std::string> categories;
  std::vector<std::string> ids;
  // Row-major [rows(i) x categories.size()] per example.
  std::vector<std::vector<double>> probs;

  std::size_t size() const { return ids.size(); }
  std::size_t num_categories() const { return categories.size(); }
  std::size_t rows(std::size_t i) const { return probs[i].size() / categories.size(); }
  std::span<const double> row(std::size_t i, std::size_t r) const {
    return std::span<const double>(probs[i]).subspan(r * categories.size(), categories.size());
  }
  // Lowest index wins ties.
  std::size_t argmax(std::size_t i, std::size_t r = 0) const;
  std::vector<std::string> labels(std::size_t i) const;
  // Throws unless every row is non-negative and sums to 1 within tol.
  void check_normalized(double tol = 1e-5) const;
};

std::size_t argmax(std::span<const double> v);

}  // namespace xlkd::models
