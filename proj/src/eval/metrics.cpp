// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/eval/metrics.hpp"

#include <set>

#include "xlkd/common/error.hpp"
#include "xlkd/synthlang/bio.hpp"

namespace xlkd::eval {

namespace {

void check_ids(const PredictionSet& p, const Corpus& gold) {
  if (p.size() != gold.size()) throw Error("eval: " + std::to_string(p.size()) + " predictions for " +
                                           std::to_string(gold.size()) + " examples");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.ids[i] != gold.id(i)) throw Error("eval: prediction id " + p.ids[i] + " does not match " + gold.id(i));
}

}  // namespace

double accuracy(const PredictionSet& p, const Corpus& gold) {
  check_ids(p, gold);
  if (p.task != models::Task::kSentence) throw Error("accuracy needs sentence predictions");
  if (p.size() == 0) return 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p.categories[p.argmax(i)] == gold.intent(i);
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

double SpanScores::precision() const {
  return predicted ? static_cast<double>(true_positives) / static_cast<double>(predicted) : 0.0;
}

double SpanScores::recall() const {
  return gold ? static_cast<double>(true_positives) / static_cast<double>(this->gold) : 0.0;
}

double SpanScores::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

SpanScores span_f1(std::span<const std::vector<std::string>> predicted, std::span<const std::vector<std::string>> gold) {
  if (predicted.size() != gold.size()) throw Error("span_f1: example counts differ");
  SpanScores s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].size() != gold[i].size())
      throw Error("span_f1: example " + std::to_string(i) + " has " + std::to_string(predicted[i].size()) +
                  " predicted tags for " + std::to_string(gold[i].size()) + " words");
    auto ps = synthlang::spans(predicted[i]);
    auto gs = synthlang::spans(gold[i]);
    std::set<synthlang::Span> g(gs.begin(), gs.end());
    for (const auto& sp : ps) s.true_positives += g.contains(sp);
    s.predicted += ps.size();
    s.gold += gs.size();
  }
  return s;
}

std::vector<std::vector<std::string>> predicted_tags(const PredictionSet& p) {
  if (p.task != models::Task::kWord) throw Error("predicted_tags needs word predictions");
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p.labels(i));
  return out;
}

SpanScores span_f1(const PredictionSet& p, const Corpus& gold) {
  check_ids(p, gold);
  std::vector<std::vector<std::string>> g;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto s = gold.slots(i);
    g.emplace_back(s.begin(), s.end());
  }
  return span_f1(predicted_tags(p), g);
}

double MetricsRow::average() const {
  if (scores.empty()) return 0;
  double total = 0;
  for (const auto& [lang, v] : scores) total += v;
  return total / static_cast<double>(scores.size());
}

Delta dissipation_delta(const MetricsRow& stage1, const MetricsRow& stage2) {
  Delta d;
  for (const auto& [lang, v] : stage1.scores) {
    auto it = stage2.scores.find(lang);
    if (it == stage2.scores.end()) throw Error("dissipation_delta: stage 2 has no score for " + lang);
    d.per_language[lang] = it->second - v;
  }
  if (stage2.scores.size() != stage1.scores.size()) throw Error("dissipation_delta: language sets differ");
  d.average = stage2.average() - stage1.average();
  return d;
}

}  // namespace xlkd::eval
