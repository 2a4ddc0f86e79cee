// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xlkd/numeric/graph.hpp"

namespace xlkd::train {

using numeric::Parameter;
using numeric::Tensor;

struct AdamWSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Decoupled weight decay:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * wd * p
// Gradients are checked for finiteness first; a bad one throws NumericError
// naming the parameter and leaves everything untouched.
void adamw_step(std::span<Parameter> params, AdamState& state, double lr, const AdamWSettings& s);

// Global L2 norm of all gradients; scales them down to max_norm if larger.
double clip_grad_norm(std::span<Parameter> params, double max_norm);

}  // namespace xlkd::train
