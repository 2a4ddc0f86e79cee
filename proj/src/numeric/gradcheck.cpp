// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace xlkd::numeric {

namespace {

double scalar_of(Graph& g, Var out) { return g.value(out).get(0); }

void record_error(GradCheckResult& r, std::size_t index, double analytic, double numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
    if (r.finite) {
      r.finite = false;
      r.worst_index = index;
      r.message = "non-finite value at coordinate " + std::to_string(index);
    }
    return;
  }
  const double err =
      std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
  if (err > r.max_relative_error) {
    r.max_relative_error = err;
    if (r.finite) r.worst_index = index;
  }
}

}  // namespace

GradCheckResult gradient_check(const ScalarFn& fn, const Tensor& point, double step) {
  PrecisionScope scope(Precision::kFloat64);
  const Tensor base = point.converted(Precision::kFloat64);
  GradCheckResult result;

  Tensor analytic;
  {
    Graph g;
    Var x = g.variable(base);
    Var out = fn(g, x);
    g.backward(out);
    const Tensor* gx = g.grad(x);
    analytic = gx ? *gx : Tensor(base.shape(), Precision::kFloat64);
  }

  auto eval_at = [&](const Tensor& p) {
    Graph g;
    Var x = g.variable(p);
    return scalar_of(g, fn(g, x));
  };

  for (std::size_t i = 0; i < base.size(); ++i) {
    Tensor plus = base, minus = base;
    plus.set(i, base.get(i) + step);
    minus.set(i, base.get(i) - step);
    const double numeric = (eval_at(plus) - eval_at(minus)) / (2.0 * step);
    record_error(result, i, analytic.get(i), numeric);
  }
  return result;
}

GradCheckResult gradient_check_parameters(const std::function<Var(Graph&)>& fn,
                                          const std::vector<Parameter*>& params, double step,
                                          std::size_t max_coords) {
  PrecisionScope scope(Precision::kFloat64);
  for (Parameter* p : params) {
    p->value = p->value.converted(Precision::kFloat64);
    p->grad = Tensor(p->value.shape(), Precision::kFloat64);
  }
  {
    Graph g;
    g.backward(fn(g));
  }
  auto eval = [&]() {
    Graph g;
    Var out = fn(g);
    return scalar_of(g, out);
  };

  GradCheckResult result;
  std::size_t flat_offset = 0;
  for (Parameter* p : params) {
    const std::size_t n = p->value.size();
    const std::size_t stride = (max_coords == 0 || n <= max_coords) ? 1 : n / max_coords;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p->value.get(i);
      p->value.set(i, orig + step);
      const double up = eval();
      p->value.set(i, orig - step);
      const double down = eval();
      p->value.set(i, orig);
      record_error(result, flat_offset + i, p->grad.get(i), (up - down) / (2.0 * step));
    }
    flat_offset += n;
  }
  return result;
}

}  // namespace xlkd::numeric
