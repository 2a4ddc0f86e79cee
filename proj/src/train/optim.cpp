// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/train/optim.hpp"

#include <cmath>

#include "xlkd/common/error.hpp"

namespace xlkd::train {

using numeric::dispatch;

void adamw_step(std::span<Parameter> params, AdamState& state, double lr, const AdamWSettings& s) {
  for (const Parameter& p : params) {
    dispatch(p.grad.precision(), [&]<class T>(T) {
      for (T g : p.grad.data<T>())
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name);
    });
  }
  if (state.m.empty()) {
    for (const Parameter& p : params) {
      state.m.emplace_back(p.value.shape(), p.value.precision());
      state.v.emplace_back(p.value.shape(), p.value.precision());
    }
  }
  if (state.m.size() != params.size()) throw Error("adamw: optimizer state built for a different parameter set");
  ++state.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    dispatch(p.value.precision(), [&]<class T>(T) {
      auto w = p.value.data<T>();
      auto g = p.grad.data<T>();
      auto m = state.m[i].data<T>();
      auto v = state.v[i].data<T>();
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = g[k];
        const double mk = s.beta1 * m[k] + (1 - s.beta1) * gk;
        const double vk = s.beta2 * v[k] + (1 - s.beta2) * gk * gk;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        const double wk = w[k];
        w[k] = static_cast<T>(wk - lr * (mk / c1) / (std::sqrt(vk / c2) + s.eps) - lr * s.weight_decay * wk);
      }
    });
  }
}

double clip_grad_norm(std::span<Parameter> params, double max_norm) {
  double sq = 0;
  for (const Parameter& p : params)
    dispatch(p.grad.precision(), [&]<class T>(T) {
      for (T g : p.grad.data<T>()) sq += static_cast<double>(g) * g;
    });
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double f = max_norm / norm;
    for (Parameter& p : params)
      dispatch(p.grad.precision(), [&]<class T>(T) {
        for (T& g : p.grad.data<T>()) g = static_cast<T>(g * f);
      });
  }
  return norm;
}

}  // namespace xlkd::train
