// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/models/predictions.hpp"

#include <cmath>

#include "xlkd/common/error.hpp"

namespace xlkd::models {

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::size_t PredictionSet::argmax(std::size_t i, std::size_t r) const { return models::argmax(row(i, r)); }

std::vector<std::string> PredictionSet::labels(std::size_t i) const {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < rows(i); ++r) out.push_back(categories[argmax(i, r)]);
  return out;
}

void PredictionSet::check_normalized(double tol) const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (probs[i].size() % categories.size() != 0) throw Error("predictions for " + ids[i] + " are ragged");
    for (std::size_t r = 0; r < rows(i); ++r) {
      double total = 0;
      for (double p : row(i, r)) {
        if (!(p >= 0)) throw NumericError("negative or non-finite probability for " + ids[i]);
        total += p;
      }
      if (std::abs(total - 1.0) > tol) throw NumericError("probabilities for " + ids[i] + " sum to " + std::to_string(total));
    }
  }
}

}  // namespace xlkd::models
