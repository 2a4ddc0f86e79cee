// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/train/supervised.hpp"

#include <algorithm>
#include <numeric>

#include "xlkd/common/error.hpp"
#include "xlkd/common/seed.hpp"

namespace xlkd::train {

using models::PackedBatch;
using numeric::Graph;
using numeric::Var;

namespace {

int category_index(std::span<const std::string> categories, const std::string& label) {
  auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) throw Error("label " + label + " is not a model category");
  return static_cast<int>(it - categories.begin());
}

}  // namespace

Targets gold_targets(const synthlang::Corpus& corpus, Task task, std::span<const std::string> categories) {
  Targets out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (task == Task::kSentence) {
      out.push_back({category_index(categories, corpus.intent(i))});
    } else {
      std::vector<int> row;
      for (const std::string& tag : corpus.slots(i)) row.push_back(category_index(categories, tag));
      out.push_back(std::move(row));
    }
  }
  return out;
}

FitResult train_supervised(EncoderModel& model, std::span<const Tokenization> inputs, const Targets& targets, Task task,
                           const Validator& validate, const TrainSettings& settings, std::string_view job) {
  if (inputs.size() != targets.size()) throw Error("train_supervised: inputs and targets differ in length");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t want = task == Task::kSentence ? 1 : inputs[i].num_words();
    if (targets[i].size() != want) throw Error("train_supervised: wrong target count for example " + std::to_string(i));
  }
  BatchLoss loss = [&](Graph& g, std::span<const std::size_t> idx) {
    std::vector<Tokenization> batch;
    std::vector<int> flat;
    for (std::size_t i : idx) {
      batch.push_back(inputs[i]);
      flat.insert(flat.end(), targets[i].begin(), targets[i].end());
    }
    Var lp = model.log_probs(g, PackedBatch::pack(batch), task);
    return numeric::scale(numeric::nll(lp, flat), 1.0 / static_cast<double>(std::max<std::size_t>(flat.size(), 1)));
  };
  return fit(model.parameters(), inputs.size(), loss, validate, settings, job);
}

std::vector<std::pair<std::size_t, int>> mask_tokens(Tokenization& tok, double rate, Rng& rng) {
  std::vector<std::pair<std::size_t, int>> out;
  const std::size_t first = tok.bos ? 1 : 0;
  if (tok.ids.size() <= first) return out;
  for (std::size_t i = first; i < tok.ids.size(); ++i)
    if (uniform01(rng) < rate) out.emplace_back(i, tok.ids[i]);
  if (out.empty()) {
    const std::size_t i = first + uniform_index(rng, tok.ids.size() - first);
    out.emplace_back(i, tok.ids[i]);
  }
  for (auto [i, id] : out) tok.ids[i] = tokenize::kMask;
  return out;
}

PretrainResult pivot_pretrain(const models::ArchConfig& config, std::span<const Tokenization> inputs,
                              std::size_t heldout, const PretrainSettings& s) {
  if (!config.mlm) throw Error("pivot_pretrain: config has no masked-token layer");
  if (heldout >= inputs.size()) throw Error("pivot_pretrain: nothing left to train on");
  PretrainResult out{EncoderModel::build(config, s.seed), {}, 0};
  EncoderModel& model = out.model;
  const std::size_t n = inputs.size() - heldout;
  Rng order_rng = make_rng(s.seed, "pretrain/order");
  Rng mask_rng = make_rng(s.seed, "pretrain/mask");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;
  AdamState state;
  double block = 0;

  auto masked_batch = [&](std::span<const std::size_t> idx, Rng& rng, std::vector<int>& rows, std::vector<int>& targets) {
    std::vector<Tokenization> batch;
    std::size_t offset = 0;
    for (std::size_t i : idx) {
      Tokenization t = inputs[i];
      for (auto [pos, id] : mask_tokens(t, s.mask_rate, rng)) {
        rows.push_back(static_cast<int>(offset + pos));
        targets.push_back(id);
      }
      offset += t.ids.size();
      batch.push_back(std::move(t));
    }
    return PackedBatch::pack(batch);
  };

  for (std::size_t step = 0; step < s.steps; ++step) {
    if (cursor + s.batch_size > n) {
      shuffle(order.begin(), order.end(), order_rng);
      cursor = 0;
    }
    const std::size_t len = std::min(s.batch_size, n);
    std::span<const std::size_t> idx(order.data() + cursor, len);
    cursor += len;
    std::vector<int> rows, targets;
    PackedBatch packed = masked_batch(idx, mask_rng, rows, targets);
    Graph g(true, derive_seed(s.seed, "pretrain/step/" + std::to_string(step)));
    Var loss = numeric::scale(numeric::nll(model.mlm_log_probs(g, packed, rows), targets),
                              1.0 / static_cast<double>(targets.size()));
    const double value = loss.value().get(0);
    if (!std::isfinite(value)) throw NumericError("pivot_pretrain: non-finite loss at step " + std::to_string(step));
    model.zero_grad();
    g.backward(loss);
    clip_grad_norm(model.parameters(), 5.0);
    adamw_step(model.parameters(), state, s.lr, s.adamw);
    block += value;
    if ((step + 1) % 50 == 0 || step + 1 == s.steps) {
      const std::size_t in_block = (step % 50) + 1;
      out.losses.push_back(block / static_cast<double>(in_block));
      block = 0;
    }
  }

  Rng eval_rng = make_rng(s.seed, "pretrain/heldout");
  std::size_t hit = 0, total = 0;
  for (std::size_t b = n; b < inputs.size(); b += s.batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(inputs.size(), b + s.batch_size); ++i) idx.push_back(i);
    std::vector<int> rows, targets;
    PackedBatch packed = masked_batch(idx, eval_rng, rows, targets);
    Graph g(false);
    const Tensor& lp = model.mlm_log_probs(g, packed, rows).value();
    for (std::size_t r = 0; r < targets.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < lp.cols(); ++k)
        if (lp.at(r, k) > lp.at(r, best)) best = k;
      hit += static_cast<int>(best) == targets[r];
      ++total;
    }
  }
  out.masked_accuracy = total ? static_cast<double>(hit) / static_cast<double>(total) : 0;
  return out;
}

}  // namespace xlkd::train
