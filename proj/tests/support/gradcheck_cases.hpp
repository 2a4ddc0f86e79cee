// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

// Gradient-check cases shared by the unit tests and the acceptance binary.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xlkd/common/seed.hpp"
#include "xlkd/models/model.hpp"
#include "xlkd/numeric/gradcheck.hpp"
#include "xlkd/numeric/ops.hpp"

namespace xlkd::numeric::testing_support {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.set(i, lo + (hi - lo) * uniform01(rng));
  return t;
}

// Contract the output with fixed random weights so no coordinate cancels.
inline Var weighted_sum(Graph& g, Var y, uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, g.constant(random_tensor(y.shape(), rng))));
}

struct PrimitiveCase {
  std::string name;
  Shape shape;
  std::function<Var(Graph&, Var, uint64_t)> build;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  auto consts = [](Graph& g, Shape s, uint64_t seed) {
    Rng rng(seed * 7919 + 13);
    return g.constant(random_tensor(std::move(s), rng));
  };
  std::vector<PrimitiveCase> cases;
  cases.push_back({"matmul", {3, 8}, [](Graph&, Var x, uint64_t) {
                     return matmul(slice_cols(x, 0, 4), slice_cols(x, 4, 8), /*transpose_b=*/true);
                   }});
  cases.push_back({"matmul_plain", {4, 4}, [](Graph&, Var x, uint64_t) { return matmul(x, x); }});
  cases.push_back({"add_broadcast", {4, 3}, [](Graph&, Var x, uint64_t) {
                     return add(x, rows(x, std::vector<int>{2}));
                   }});
  cases.push_back({"sub", {2, 6}, [](Graph&, Var x, uint64_t) {
                     return sub(slice_cols(x, 0, 3), slice_cols(x, 3, 6));
                   }});
  cases.push_back({"mul", {2, 6}, [](Graph&, Var x, uint64_t) {
                     return mul(slice_cols(x, 0, 3), slice_cols(x, 3, 6));
                   }});
  cases.push_back({"div", {2, 6}, [](Graph& g, Var x, uint64_t) {
                     Var den = add(mul(slice_cols(x, 3, 6), slice_cols(x, 3, 6)),
                                   g.constant(Tensor::from({3}, {0.5, 0.5, 0.5})));
                     return div(slice_cols(x, 0, 3), den);
                   }});
  cases.push_back({"scale", {3}, [](Graph&, Var x, uint64_t) { return scale(x, -2.5); }});
  cases.push_back({"embedding", {5, 3}, [](Graph&, Var x, uint64_t) {
                     return embedding(x, std::vector<int>{4, 0, 4, 2});
                   }});
  cases.push_back({"softmax", {2, 5}, [](Graph&, Var x, uint64_t) { return softmax(x); }});
  cases.push_back({"log_softmax", {2, 5}, [](Graph&, Var x, uint64_t) { return log_softmax(x); }});
  cases.push_back({"log", {2, 3}, [](Graph&, Var x, uint64_t) { return log(sigmoid(x)); }});
  cases.push_back({"sigmoid", {2, 3}, [](Graph&, Var x, uint64_t) { return sigmoid(x); }});
  cases.push_back({"tanh", {2, 3}, [](Graph&, Var x, uint64_t) { return tanh(x); }});
  cases.push_back({"relu", {2, 3}, [](Graph&, Var x, uint64_t) { return relu(x); }});
  cases.push_back({"conv1d_input", {6, 3}, [consts](Graph& g, Var x, uint64_t s) {
                     return conv1d(x, consts(g, {3 * 3, 4}, s), consts(g, {4}, s + 1), 3, 2);
                   }});
  cases.push_back({"conv1d_weight", {4 * 2, 3}, [consts](Graph& g, Var w, uint64_t s) {
                     return conv1d(consts(g, {5, 2}, s), w, consts(g, {3}, s + 1), 4, 1);
                   }});
  cases.push_back({"conv1d_bias", {3}, [consts](Graph& g, Var b, uint64_t s) {
                     return conv1d(consts(g, {5, 2}, s), consts(g, {5 * 2, 3}, s + 1), b, 5, 1);
                   }});
  cases.push_back({"max_over_time", {5, 4}, [](Graph&, Var x, uint64_t) { return max_over_time(x); }});
  static const std::vector<Segment> kSegs{{0, 2}, {2, 7}};
  cases.push_back({"conv1d_segmented", {7, 2}, [consts](Graph& g, Var x, uint64_t s) {
                     return conv1d(x, consts(g, {3 * 2, 3}, s), consts(g, {3}, s + 1), 3, 2, kSegs);
                   }});
  cases.push_back({"max_over_time_segmented", {7, 3}, [](Graph&, Var x, uint64_t) {
                     return max_over_time(x, kSegs);
                   }});
  cases.push_back({"attention", {7, 12}, [](Graph&, Var x, uint64_t) {
                     return attention(slice_cols(x, 0, 4), slice_cols(x, 4, 8), slice_cols(x, 8, 12), 2, kSegs);
                   }});
  cases.push_back({"lstm_input", {7, 8}, [consts](Graph& g, Var x, uint64_t s) {
                     return lstm(x, consts(g, {2, 8}, s), kSegs, false);
                   }});
  cases.push_back({"lstm_recurrent_reverse", {3, 12}, [consts](Graph& g, Var u, uint64_t s) {
                     return lstm(consts(g, {7, 12}, s), u, kSegs, true);
                   }});
  cases.push_back({"concat_rows", {2, 6}, [](Graph&, Var x, uint64_t) {
                     return concat({slice_cols(x, 0, 3), slice_cols(x, 3, 6), slice_cols(x, 1, 4)}, 0);
                   }});
  cases.push_back({"concat_cols", {3, 4}, [](Graph&, Var x, uint64_t) {
                     return concat({x, rows(x, std::vector<int>{2, 0, 1})}, 1);
                   }});
  cases.push_back({"rows", {4, 3}, [](Graph&, Var x, uint64_t) { return rows(x, std::vector<int>{3, 1, 3}); }});
  cases.push_back({"slice_cols", {2, 5}, [](Graph&, Var x, uint64_t) { return slice_cols(x, 1, 4); }});
  cases.push_back({"sum", {2, 3}, [](Graph&, Var x, uint64_t) { return sum(mul(x, x)); }});
  cases.push_back({"mean", {2, 3}, [](Graph&, Var x, uint64_t) { return mean(mul(x, x)); }});
  cases.push_back({"layer_norm_input", {3, 5}, [consts](Graph& g, Var x, uint64_t s) {
                     return layer_norm(x, consts(g, {5}, s), consts(g, {5}, s + 1));
                   }});
  cases.push_back({"layer_norm_affine", {2, 5}, [consts](Graph& g, Var p, uint64_t s) {
                     Var x = consts(g, {3, 5}, s);
                     Var gain = rows(p, std::vector<int>{0});
                     Var bias = rows(p, std::vector<int>{1});
                     return layer_norm(x, gain, bias);
                   }});
  cases.push_back({"kl_div", {2, 4}, [consts](Graph& g, Var x, uint64_t s) {
                     Graph scratch;
                     Tensor teacher = softmax(consts(scratch, {2, 4}, s)).value();
                     teacher.set(1, 0.0);  // a zero-probability teacher entry
                     return kl_div(log_softmax(x), teacher);
                   }});
  cases.push_back({"nll", {3, 4}, [](Graph&, Var x, uint64_t) {
                     return nll(log_softmax(x), std::vector<int>{1, 3, 0});
                   }});
  return cases;
}

// Worst relative error of one case over seeds 1..n, 64-bit.
inline GradCheckResult check_primitive(const PrimitiveCase& c, uint64_t seeds) {
  PrecisionScope scope(Precision::kFloat64);
  GradCheckResult worst;
  for (uint64_t seed = 1; seed <= seeds; ++seed) {
    Rng rng(seed);
    const Tensor point = random_tensor(c.shape, rng);
    ScalarFn fn = [&](Graph& g, Var x) {
      Var y = c.build(g, x, seed);
      return y.value().size() == 1 ? y : weighted_sum(g, y, seed + 100);
    };
    GradCheckResult r = gradient_check(fn, point);
    if (worst.finite && (!r.finite || r.max_relative_error > worst.max_relative_error)) worst = r;
  }
  return worst;
}

// Tiny model of each family; bos + subwords with the given word widths.
inline tokenize::Tokenization make_tok(std::vector<int> subwords, std::vector<std::size_t> widths) {
  tokenize::Tokenization t;
  t.bos = true;
  t.ids.push_back(tokenize::kBos);
  t.ids.insert(t.ids.end(), subwords.begin(), subwords.end());
  std::size_t at = 1;
  for (std::size_t w : widths) {
    t.word_spans.push_back({at, at + w});
    t.first_subword.push_back(at);
    at += w;
  }
  return t;
}

inline models::ArchConfig tiny_config(models::Family f, models::HeadType head) {
  models::ArchConfig c = models::edge_config(f, head, 20);
  if (c.has_sentence_head()) c.sentence_labels = {"a", "b", "c", "d"};
  if (c.has_word_head()) c.word_labels = {"O", "B-X", "I-X"};
  c.embed = 6;
  c.hidden = f == models::Family::kBiLstm ? 6 : 4;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_len = 16;
  c.dropout = 0;
  return c;
}

// Parameter gradients of the task loss against central differences, at most
// `coords` coordinates per parameter.
inline GradCheckResult check_architecture(models::Family f, models::HeadType head, std::size_t coords) {
  PrecisionScope scope(Precision::kFloat64);
  std::vector<tokenize::Tokenization> batch = {make_tok({5, 6, 7, 8}, {2, 1, 1}),
                                               make_tok({9, 10, 11, 12, 13, 14}, {1, 1, 3, 1})};
  models::EncoderModel m = models::EncoderModel::build(tiny_config(f, head), 9);
  models::PackedBatch packed = models::PackedBatch::pack(batch);
  const models::Task task = head == models::HeadType::kSentence ? models::Task::kSentence : models::Task::kWord;
  std::vector<int> targets(task == models::Task::kSentence ? 2 : packed.first_subwords.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i % 3);
  std::vector<Parameter*> params;
  for (auto& p : m.parameters()) params.push_back(&p);
  auto fn = [&](Graph& g) { return nll(m.log_probs(g, packed, task), targets); };
  return gradient_check_parameters(fn, params, 1e-5, coords);
}

}  // namespace xlkd::numeric::testing_support
