// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xlkd/numeric/graph.hpp"

namespace xlkd::numeric {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;  // flat coordinate of the largest error
  bool finite = true;
  std::string message;  // set when a non-finite value was met
  bool passed(double tol) const { return finite && max_relative_error < tol; }
};

// Builds the scalar output from a fresh graph and a variable bound to the
// probe point. Must be deterministic across calls.
using ScalarFn = std::function<Var(Graph&, Var)>;

// Compares reverse-mode gradients against central differences,
//   err_i = |analytic - numeric| / max(1, |analytic|, |numeric|),
// and reports the maximum. Runs in 64-bit mode.
GradCheckResult gradient_check(const ScalarFn& fn, const Tensor& point, double step = 1e-5);

// Same check over a set of external parameters; fn rebuilds the objective on
// a fresh graph each call. `max_coords` > 0 samples that many coordinates per
// parameter (deterministically, evenly strided).
GradCheckResult gradient_check_parameters(const std::function<Var(Graph&)>& fn,
                                          const std::vector<Parameter*>& params, double step = 1e-5,
                                          std::size_t max_coords = 0);

}  // namespace xlkd::numeric
