// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "xlkd/common/error.hpp"
#include "xlkd/common/seed.hpp"
#include "xlkd/eval/metrics.hpp"
#include "xlkd/eval/report.hpp"
#include "xlkd/synthlang/benchmark.hpp"

namespace xlkd::eval {
namespace {

using models::Task;
using synthlang::Example;

Corpus intents_corpus(std::vector<std::string> intents) {
  std::vector<Example> ex;
  for (std::size_t i = 0; i < intents.size(); ++i)
    ex.push_back({"e" + std::to_string(i), "en", {"w"}, intents[i], std::vector<std::string>{"O"}});
  return Corpus("c", "en", ex);
}

PredictionSet sentence_predictions(const std::vector<std::string>& categories, const std::vector<std::size_t>& picks) {
  PredictionSet p;
  p.task = Task::kSentence;
  p.categories = categories;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    std::vector<double> row(categories.size(), 0.1 / static_cast<double>(categories.size() - 1));
    row[picks[i]] = 0.9;
    p.ids.push_back("e" + std::to_string(i));
    p.probs.push_back(row);
  }
  return p;
}

TEST(Accuracy, HandCases) {
  const std::vector<std::string> cats = {"a", "b", "c"};
  Corpus gold = intents_corpus({"a", "b", "c", "a"});
  EXPECT_EQ(accuracy(sentence_predictions(cats, {0, 1, 2, 0}), gold), 1.0);
  EXPECT_EQ(accuracy(sentence_predictions(cats, {0, 1, 2, 1}), gold), 0.75);
  PredictionSet wrong = sentence_predictions(cats, {0, 1, 2, 0});
  wrong.ids[2] = "zz";
  EXPECT_THROW(accuracy(wrong, gold), Error);
  EXPECT_THROW(accuracy(sentence_predictions(cats, {0}), gold), Error);
}

TEST(Accuracy, InvariantUnderReordering) {
  const std::vector<std::string> cats = {"a", "b", "c"};
  std::vector<std::string> intents = {"a", "b", "c", "a", "c", "b"};
  std::vector<std::size_t> picks = {0, 2, 2, 0, 1, 1};
  const double base = accuracy(sentence_predictions(cats, picks), intents_corpus(intents));
  std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  std::vector<std::string> pi;
  std::vector<std::size_t> pp;
  for (std::size_t k : perm) {
    pi.push_back(intents[k]);
    pp.push_back(picks[k]);
  }
  EXPECT_EQ(accuracy(sentence_predictions(cats, pp), intents_corpus(pi)), base);
}

TEST(Accuracy, UniformPredictorOnGeneratedTest) {
  auto langs = synthlang::LanguageSet::load(std::string(XLKD_SOURCE_DIR) + "/configs/synthlang.json");
  auto bench = synthlang::generate(langs, synthlang::SplitSizes{}, 1);
  const Corpus& test = bench.at("en").at("test");
  const auto& cats = langs.grammar().intents();
  PredictionSet p;
  p.task = Task::kSentence;
  p.categories = cats;
  for (std::size_t i = 0; i < test.size(); ++i) {
    p.ids.push_back(test.id(i));
    p.probs.emplace_back(cats.size(), 1.0 / static_cast<double>(cats.size()));
  }
  // Ties go to index 0, so the expectation is the share of that intent.
  std::size_t first = 0;
  for (std::size_t i = 0; i < test.size(); ++i) first += test.intent(i) == cats[0];
  const double acc = accuracy(p, test);
  EXPECT_DOUBLE_EQ(acc, static_cast<double>(first) / static_cast<double>(test.size()));
  EXPECT_NEAR(acc, 1.0 / 8, 0.05);
}

using Tags = std::vector<std::string>;

TEST(SpanF1, HandCase) {
  std::vector<Tags> gold = {{"O", "B-FROM", "I-FROM", "O", "O"}};
  std::vector<Tags> pred = {{"O", "B-FROM", "I-FROM", "B-TO", "O"}};
  SpanScores s = span_f1(pred, gold);
  EXPECT_EQ(s.precision(), 0.5);
  EXPECT_EQ(s.recall(), 1.0);
  EXPECT_EQ(s.f1(), 2.0 / 3.0);
  EXPECT_EQ(span_f1(gold, gold).f1(), 1.0);
  std::vector<Tags> none = {Tags(5, "O")};
  EXPECT_EQ(span_f1(none, gold).recall(), 0.0);
  EXPECT_EQ(span_f1(none, gold).f1(), 0.0);
  EXPECT_THROW(span_f1(std::vector<Tags>{{"O"}}, gold), Error);
}

// Direct scan: a span opens at B-x, or at I-x that does not continue a
// running x span, and extends over following I-x.
std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::string>> scan(const std::vector<Tags>& seqs) {
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::string>> out;
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const Tags& t = seqs[k];
    std::size_t i = 0;
    while (i < t.size()) {
      if (t[i] == "O") {
        ++i;
        continue;
      }
      const std::string type = t[i].substr(2);
      std::size_t j = i + 1;
      while (j < t.size() && t[j] == "I-" + type) ++j;
      out.emplace(k, i, j, type);
      i = j;
    }
  }
  return out;
}

TEST(SpanF1, MatchesBruteForceOnRandomSequences) {
  const std::vector<std::string> alphabet = {"O", "B-a", "I-a", "B-b", "I-b"};
  Rng rng = make_rng(9, "bio");
  auto random_seq = [&](std::size_t n) {
    Tags t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(alphabet[uniform_index(rng, alphabet.size())]);
    return t;
  };
  std::vector<Tags> gold, pred;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    gold.push_back(random_seq(n));
    // Half the predictions are perturbed copies so matches occur.
    Tags p = uniform01(rng) < 0.5 ? gold.back() : random_seq(n);
    if (!p.empty() && uniform01(rng) < 0.5) p[uniform_index(rng, n)] = alphabet[uniform_index(rng, alphabet.size())];
    pred.push_back(p);
    SpanScores one = span_f1(std::vector<Tags>{pred.back()}, std::vector<Tags>{gold.back()});
    auto g1 = scan({gold.back()}), p1 = scan({pred.back()});
    std::size_t tp = 0;
    for (const auto& s : p1) tp += g1.contains(s);
    ASSERT_EQ(one.true_positives, tp);
    ASSERT_EQ(one.predicted, p1.size());
    ASSERT_EQ(one.gold, g1.size());
  }
  auto g = scan(gold), p = scan(pred);
  std::size_t tp = 0;
  for (const auto& s : p) tp += g.contains(s);
  SpanScores s = span_f1(pred, gold);
  EXPECT_EQ(s.true_positives, tp);
  EXPECT_EQ(s.predicted, p.size());
  EXPECT_EQ(s.gold, g.size());
  const double prec = static_cast<double>(tp) / static_cast<double>(p.size());
  const double rec = static_cast<double>(tp) / static_cast<double>(g.size());
  EXPECT_DOUBLE_EQ(s.f1(), 2 * prec * rec / (prec + rec));
}

TEST(SpanF1, FromPredictionSet) {
  std::vector<Example> ex = {{"e0", "en", {"to", "new", "york"}, "flight", Tags{"O", "B-toloc", "I-toloc"}}};
  Corpus gold("g", "en", ex);
  PredictionSet p;
  p.task = Task::kWord;
  p.categories = {"O", "B-toloc", "I-toloc"};
  p.ids = {"e0"};
  p.probs = {{0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.2, 0.7}};
  EXPECT_EQ(span_f1(p, gold).f1(), 1.0);
  EXPECT_EQ(predicted_tags(p)[0], (Tags{"O", "B-toloc", "I-toloc"}));
}

TEST(Dissipation, Deltas) {
  MetricsRow a{"stage1", "sentence", {{"xa", 0.9}, {"xb", 0.8}}, 0.95};
  MetricsRow b{"stage2", "sentence", {{"xa", 0.85}, {"xb", 0.8}}, std::nullopt};
  Delta d = dissipation_delta(a, b);
  EXPECT_NEAR(d.per_language.at("xa"), -0.05, 1e-12);
  EXPECT_EQ(d.per_language.at("xb"), 0.0);
  EXPECT_NEAR(d.average, -0.025, 1e-12);
  EXPECT_EQ(dissipation_delta(a, a).average, 0.0);
  MetricsRow s1{"s1", "sentence", {{"l", 92.8}}, std::nullopt};
  MetricsRow s2{"s2", "sentence", {{"l", 87.7}}, std::nullopt};
  EXPECT_NEAR(dissipation_delta(s1, s2).average, -5.1, 1e-9);
  MetricsRow other{"x", "sentence", {{"xc", 0.5}, {"xa", 0.5}}, std::nullopt};
  EXPECT_THROW(dissipation_delta(a, other), Error);
  // Source score stays out of the average.
  EXPECT_NEAR(a.average(), 0.85, 1e-12);
}

ReportRow row(RowGroup g, std::string label, std::string src, std::string tgt, double xa, double xb) {
  ReportRow r;
  r.group = g;
  r.label = std::move(label);
  r.source_arch = std::move(src);
  r.target_arch = std::move(tgt);
  r.pivot_size = g == RowGroup::kOurs ? 0 : -1;
  r.metrics = {r.label, "sentence", {{"xa", xa}, {"xb", xb}}, std::nullopt};
  return r;
}

std::vector<ReportRow> sample_rows() {
  std::vector<ReportRow> rows;
  rows.push_back(row(RowGroup::kOurs, "2-step KD", "cnn", "transformer", 0.6, 0.7));
  rows.push_back(row(RowGroup::kOurs, "2-step KD", "transformer", "transformer", 0.8, 0.9));
  rows.back().stage1 = MetricsRow{"pivot", "sentence", {{"xa", 0.9}, {"xb", 0.9}}, std::nullopt};
  rows.push_back(row(RowGroup::kBaseline, "Translate-train-pseudo", "transformer", "transformer", 0.7, 0.7));
  rows.push_back(row(RowGroup::kReference, "Gold-supervised target", "", "transformer", 0.95, 0.95));
  ReportRow src = row(RowGroup::kSource, "Off-the-shelf source", "transformer", "", 0, 0);
  src.metrics.scores.clear();
  src.metrics.source_score = 0.97;
  rows.push_back(src);
  return rows;
}

TEST(Report, FixedRowOrder) {
  auto rows = sample_rows();
  ExperimentReport a = build_report(rows, {});
  std::reverse(rows.begin(), rows.end());
  ExperimentReport b = build_report(rows, {});
  std::vector<std::string> labels;
  for (const auto& r : a.rows) labels.push_back(r.label + "/" + r.source_arch);
  EXPECT_EQ(labels, (std::vector<std::string>{"Off-the-shelf source/transformer", "Gold-supervised target/",
                                              "Translate-train-pseudo/transformer", "2-step KD/transformer",
                                              "2-step KD/cnn"}));
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.markdown(), b.markdown());
  EXPECT_EQ(a.languages, (std::vector<std::string>{"xa", "xb"}));
}

TEST(Report, GridAndDissipation) {
  auto rows = sample_rows();
  TransferGrid g = build_grid(rows, "sentence", 0);
  EXPECT_EQ(g.populated(), 2u);
  EXPECT_NEAR(*g.score[0][0], 0.85, 1e-12);
  EXPECT_NEAR(*g.drop[0][0], 0.97 - 0.85, 1e-12);
  EXPECT_NEAR(*g.score[2][0], 0.65, 1e-12);
  EXPECT_FALSE(g.drop[2][0]);  // no cnn source row
  EXPECT_FALSE(g.score[1][1]);
  ExperimentReport rep = build_report(rows, {g, build_grid(rows, "sentence", 1)});
  EXPECT_EQ(rep.grids.size(), 1u);
  const std::string md = rep.markdown();
  EXPECT_NE(md.find("Transfer grid (pivot 0"), std::string::npos);
  EXPECT_NE(md.find(" -5.0 |"), std::string::npos) << md;  // 85.0 vs 90.0
  EXPECT_NE(rep.grid_csv().find("sentence,0,score,transformer,0.850000,,\n"), std::string::npos);
  EXPECT_NEAR(rep.to_json()["rows"][3]["delta"]["average"].get<double>(), -0.05, 1e-12);

  ExperimentReport no_grid = build_report(rows, {build_grid(rows, "word", 0)});
  EXPECT_EQ(no_grid.markdown().find("Transfer grid"), std::string::npos);
  EXPECT_EQ(no_grid.grid_csv(), "");
  EXPECT_EQ(no_grid.markdown().find("Slot tagging"), std::string::npos);
}

TEST(Report, RowJsonRoundTrip) {
  for (const ReportRow& r : sample_rows()) {
    ReportRow back = ReportRow::from_json(r.to_json());
    EXPECT_EQ(back.to_json().dump(), r.to_json().dump());
    EXPECT_EQ(back.key(), r.key());
  }
  EXPECT_THROW(ReportRow::from_json({{"group", "other"}}), Error);
}

}  // namespace
}  // namespace xlkd::eval
