// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/train/fit.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "xlkd/common/error.hpp"
#include "xlkd/common/seed.hpp"

namespace xlkd::train {

using numeric::Graph;
using numeric::Var;

namespace {

std::vector<Tensor> snapshot(const std::vector<Parameter>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter& p : params) out.push_back(p.value);
  return out;
}

void restore(std::vector<Parameter>& params, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = values[i];
}

// Forward, backward and one optimizer step; returns the batch loss.
double step(std::vector<Parameter>& params, AdamState& state, const BatchLoss& loss_fn,
            std::span<const std::size_t> batch, double lr, const TrainSettings& s, uint64_t graph_seed) {
  Graph g(true, graph_seed);
  Var loss = loss_fn(g, batch);
  const double value = loss.value().get(0);
  if (!std::isfinite(value)) return value;
  for (Parameter& p : params) p.zero_grad();
  g.backward(loss);
  if (s.clip_norm) clip_grad_norm(params, *s.clip_norm);
  adamw_step(params, state, lr, s.adamw);
  return value;
}

}  // namespace

nlohmann::json TrainSettings::to_json() const {
  nlohmann::json j = {{"epochs", epochs},
                      {"patience", patience},
                      {"batch_size", batch_size},
                      {"lr", lr ? nlohmann::json(*lr) : nlohmann::json("auto")},
                      {"beta1", adamw.beta1},
                      {"beta2", adamw.beta2},
                      {"eps", adamw.eps},
                      {"weight_decay", adamw.weight_decay},
                      {"seed", seed},
                      {"clip_norm", clip_norm ? nlohmann::json(*clip_norm) : nlohmann::json(nullptr)},
                      {"range_batches", range_batches}};
  return j;
}

TrainSettings TrainSettings::from_json(const nlohmann::json& j) {
  TrainSettings s;
  try {
    s.epochs = j.value("epochs", s.epochs);
    s.patience = j.value("patience", s.patience);
    s.batch_size = j.value("batch_size", s.batch_size);
    if (j.contains("lr")) {
      if (j["lr"].is_string()) {
        if (j["lr"] != "auto") throw SchemaError("train settings: lr must be a number or \"auto\"");
        s.lr.reset();
      } else {
        s.lr = j["lr"].get<double>();
      }
    }
    s.adamw.beta1 = j.value("beta1", s.adamw.beta1);
    s.adamw.beta2 = j.value("beta2", s.adamw.beta2);
    s.adamw.eps = j.value("eps", s.adamw.eps);
    s.adamw.weight_decay = j.value("weight_decay", s.adamw.weight_decay);
    s.seed = j.value("seed", s.seed);
    if (j.contains("clip_norm")) {
      if (j["clip_norm"].is_null()) s.clip_norm.reset();
      else s.clip_norm = j["clip_norm"].get<double>();
    }
    s.range_batches = j.value("range_batches", s.range_batches);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("train settings: ") + e.what());
  }
  if (s.batch_size == 0) throw SchemaError("train settings: batch_size must be positive");
  return s;
}

std::string FitResult::log_jsonl() const {
  std::string out;
  for (const EpochRecord& r : log) {
    nlohmann::ordered_json j = {{"epoch", r.epoch}, {"loss", r.loss}, {"val_score", r.val_score}, {"lr", r.lr}};
    out += j.dump() + "\n";
  }
  return out;
}

RangeTest pick_range_lr(std::vector<double> lrs, std::vector<double> losses, std::size_t steps) {
  constexpr double kBeta = 0.9;
  RangeTest out;
  out.lrs = std::move(lrs);
  out.losses = std::move(losses);
  double avg = 0;
  for (std::size_t i = 0; i < out.losses.size(); ++i) {
    avg = kBeta * avg + (1 - kBeta) * out.losses[i];
    out.smoothed.push_back(avg / (1 - std::pow(kBeta, static_cast<double>(i + 1))));
  }
  // Steepest drop of the smoothed loss over a window of steps (a fixed span of
  // log(lr)), looking only up to the curve's minimum. The first tenth of the
  // sweep is skipped: the bias-corrected average there rests on a handful of
  // batches and its batch-to-batch noise would win.
  const std::size_t window = std::max<std::size_t>(steps / 10, 1);
  const std::size_t burn = window;
  bool descended = out.smoothed.size() > burn + window;
  std::size_t lowest = burn;
  for (std::size_t i = burn + 1; descended && i < out.smoothed.size(); ++i)
    if (out.smoothed[i] < out.smoothed[lowest]) lowest = i;
  double steepest = 0;
  std::size_t at = 0;
  for (std::size_t i = burn + window; descended && i <= lowest; ++i) {
    const double drop = out.smoothed[i] - out.smoothed[i - window];
    if (drop < steepest) {
      steepest = drop;
      at = i - window / 2;
    }
  }
  descended = descended && out.smoothed[lowest] < out.smoothed[burn] * (1 - 1e-3) && steepest < 0;
  if (!descended) {
    out.lr = kFallbackLr;
    out.fallback = true;
  } else {
    out.lr = out.lrs[at] / 10;
  }
  return out;
}

RangeTest lr_range_test(std::vector<Parameter>& params, std::size_t n, const BatchLoss& loss_fn,
                        const TrainSettings& s, std::string_view job) {
  constexpr double kLo = 1e-6, kHi = 1e-1, kBeta = 0.9;
  const std::string name = std::string(job) + "/range";
  const std::vector<Tensor> saved = snapshot(params);
  const std::size_t steps = std::max<std::size_t>(s.range_batches, 2);
  Rng rng = make_rng(s.seed, name);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;
  AdamState state;
  std::vector<double> lrs, losses;
  double avg = 0, best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < steps; ++i) {
    const double lr = kLo * std::pow(kHi / kLo, static_cast<double>(i) / static_cast<double>(steps - 1));
    if (cursor + s.batch_size > n) {
      shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t len = std::min(s.batch_size, n);
    std::span<const std::size_t> batch(order.data() + cursor, len);
    cursor += len;
    double value;
    try {
      value = step(params, state, loss_fn, batch, lr, s, derive_seed(s.seed, name + "/" + std::to_string(i)));
    } catch (const NumericError&) {
      break;
    }
    if (!std::isfinite(value)) break;
    lrs.push_back(lr);
    losses.push_back(value);
    avg = kBeta * avg + (1 - kBeta) * value;
    const double smooth = avg / (1 - std::pow(kBeta, static_cast<double>(i + 1)));
    best = std::min(best, smooth);
    if (smooth > 4 * best) break;
  }
  restore(params, saved);
  for (Parameter& p : params) p.zero_grad();
  return pick_range_lr(std::move(lrs), std::move(losses), steps);
}

FitResult fit(std::vector<Parameter>& params, std::size_t n, const BatchLoss& loss_fn, const Validator& validate,
              const TrainSettings& s, std::string_view job) {
  if (n == 0) throw Error(std::string(job) + ": empty training set");
  FitResult result;
  if (s.lr) {
    result.lr = *s.lr;
  } else {
    RangeTest rt = lr_range_test(params, n, loss_fn, s, job);
    result.lr = rt.lr;
    result.lr_fallback = rt.fallback;
  }
  const std::string name(job);
  AdamState state;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Tensor> best_params;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= s.epochs; ++epoch) {
    Rng rng = make_rng(s.seed, name + "/shuffle/" + std::to_string(epoch));
    shuffle(order.begin(), order.end(), rng);
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += s.batch_size) {
      std::span<const std::size_t> batch(order.data() + b, std::min(s.batch_size, n - b));
      const uint64_t seed = derive_seed(s.seed, name + "/step/" + std::to_string(result.steps));
      double value;
      try {
        value = step(params, state, loss_fn, batch, result.lr, s, seed);
      } catch (const NumericError& e) {
        throw NumericError(name + ": epoch " + std::to_string(epoch) + " batch " + std::to_string(batches) + ": " +
                           e.what());
      }
      if (!std::isfinite(value))
        throw NumericError(name + ": non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batches));
      total += value;
      ++batches;
      ++result.steps;
    }
    double score = validate();
    if (!std::isfinite(score)) score = -std::numeric_limits<double>::infinity();
    result.log.push_back({epoch, total / static_cast<double>(batches), score, result.lr});
    if (score > best) {
      best = score;
      best_params = snapshot(params);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (s.patience > 0 && ++since_best >= s.patience) {
      break;
    }
  }
  if (!best_params.empty()) restore(params, best_params);
  result.best_score = best;
  return result;
}

}  // namespace xlkd::train
