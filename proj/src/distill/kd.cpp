// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/distill/kd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"
#include "xlkd/numeric/ops.hpp"

namespace xlkd::distill {

using models::PackedBatch;
using numeric::Graph;
using numeric::Tensor;
using numeric::Var;

namespace {

constexpr double kFloor = 1e-12;

void check_distribution(std::span<const double> p, const char* what) {
  double total = 0;
  for (double v : p) {
    if (!(v >= 0)) throw Error(std::string("kl_divergence: ") + what + " has a negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1) > 1e-5) throw Error(std::string("kl_divergence: ") + what + " does not sum to 1");
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw Error("kl_divergence: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()) + " categories");
  check_distribution(p, "teacher");
  check_distribution(q, "student");
  double kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kFloor)));
  return kl;
}

double kd_loss(const PredictionSet& teacher, const PredictionSet& student) {
  if (teacher.task != student.task) throw Error("kd_loss: task mismatch");
  if (teacher.categories != student.categories) throw Error("kd_loss: category sets differ");
  if (teacher.size() != student.size()) throw Error("kd_loss: example counts differ");
  double total = 0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    if (teacher.rows(i) != student.rows(i))
      throw Error("kd_loss: example " + teacher.ids[i] + " has no first-subword alignment between the two models");
    for (std::size_t r = 0; r < teacher.rows(i); ++r, ++rows) total += kl_divergence(teacher.row(i, r), student.row(i, r));
  }
  return rows ? total / static_cast<double>(rows) : 0.0;
}

Var kd_loss(Var student_log_probs, const Tensor& teacher_probs) {
  const std::size_t rows = student_log_probs.value().rows();
  return numeric::scale(numeric::kl_div(student_log_probs, teacher_probs), 1.0 / static_cast<double>(std::max<std::size_t>(rows, 1)));
}

TeacherCache::TeacherCache(PredictionSet predictions) : set_(std::move(predictions)) {
  for (std::size_t i = 0; i < set_.size(); ++i)
    if (!index_.emplace(set_.ids[i], i).second) throw Error("teacher cache: duplicate id " + set_.ids[i]);
}

const std::vector<double>& TeacherCache::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("teacher cache has no entry for " + id);
  return set_.probs[it->second];
}

std::string TeacherCache::to_jsonl() const {
  std::ostringstream out;
  nlohmann::ordered_json head = {{"task", models::to_string(set_.task)}, {"categories", set_.categories}};
  out << head.dump() << "\n";
  for (std::size_t i = 0; i < set_.size(); ++i) {
    // Doubles are written in shortest round-trip form, so reloading is exact.
    nlohmann::ordered_json j = {{"id", set_.ids[i]}, {"probs", set_.probs[i]}};
    out << j.dump() << "\n";
  }
  return out.str();
}

TeacherCache TeacherCache::parse_jsonl(const std::string& text) {
  PredictionSet p;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (first) {
        p.task = models::parse_task(j.at("task").get<std::string>());
        p.categories = j.at("categories").get<std::vector<std::string>>();
        first = false;
        continue;
      }
      p.ids.push_back(j.at("id").get<std::string>());
      p.probs.push_back(j.at("probs").get<std::vector<double>>());
      if (p.probs.back().size() % p.categories.size() != 0)
        throw SchemaError("teacher cache: entry " + p.ids.back() + " is not a whole number of rows");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("teacher cache: ") + e.what());
  }
  if (first) throw SchemaError("teacher cache: missing header line");
  return TeacherCache(std::move(p));
}

void TeacherCache::save(const std::filesystem::path& path) const { write_file(path, to_jsonl()); }

TeacherCache TeacherCache::load(const std::filesystem::path& path) { return parse_jsonl(read_file(path)); }

TeacherCache teacher_cache(const EncoderModel& teacher, const SubwordVocab& vocab, const Corpus& corpus, Task task) {
  if (corpus.labels_visible()) throw Error("teacher_cache: " + corpus.name() + " must be an unlabeled view");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < corpus.size(); ++i) ids.push_back(corpus.id(i));
  return TeacherCache(teacher.predict(tokenize::encode_corpus(vocab, corpus), ids, task));
}

namespace {

std::vector<KdExample> build_examples(const Corpus& corpus, const SubwordVocab& vocab, const TeacherCache& cache,
                                      bool by_origin) {
  if (corpus.labels_visible()) throw Error("distill: " + corpus.name() + " must be an unlabeled view");
  std::vector<KdExample> out;
  out.reserve(corpus.size());
  const std::size_t C = cache.categories().size();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string& key = by_origin ? corpus.origin(i) : corpus.id(i);
    KdExample e{vocab.encode(corpus.words(i), true), cache.at(key)};
    const std::size_t rows = cache.task() == Task::kSentence ? 1 : e.input.num_words();
    if (e.teacher.size() != rows * C)
      throw Error("distill: teacher entry " + key + " covers " + std::to_string(e.teacher.size() / C) +
                  " rows; the student input has " + std::to_string(rows));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<KdExample> kd_examples(const Corpus& corpus, const SubwordVocab& vocab, const TeacherCache& cache) {
  return build_examples(corpus, vocab, cache, false);
}

std::vector<KdExample> kd_examples_by_origin(const Corpus& corpus, const SubwordVocab& vocab, const TeacherCache& cache) {
  return build_examples(corpus, vocab, cache, true);
}

double agreement(const EncoderModel& student, std::span<const KdExample> examples, Task task) {
  std::vector<Tokenization> inputs;
  for (const KdExample& e : examples) inputs.push_back(e.input);
  std::vector<std::string> ids(inputs.size());
  PredictionSet p = student.predict(inputs, ids, task);
  const std::size_t C = p.num_categories();
  std::size_t hit = 0, rows = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (std::size_t r = 0; r < p.rows(i); ++r, ++rows) {
      std::span<const double> t(examples[i].teacher.data() + r * C, C);
      hit += p.argmax(i, r) == models::argmax(t);
    }
  }
  return rows ? static_cast<double>(hit) / static_cast<double>(rows) : 0.0;
}

train::FitResult distill(EncoderModel& student, Task task, std::span<const std::string> teacher_categories,
                         std::span<const KdExample> train,
                         std::span<const KdExample> validation, const train::TrainSettings& settings,
                         std::string_view job) {
  const auto& categories = task == Task::kSentence ? student.config().sentence_labels : student.config().word_labels;
  const std::size_t C = categories.size();
  if (C == 0) throw Error("distill: student has no " + models::to_string(task) + " head");
  if (!std::equal(categories.begin(), categories.end(), teacher_categories.begin(), teacher_categories.end()))
    throw Error("distill: teacher and student category sets differ");
  train::BatchLoss loss = [&](Graph& g, std::span<const std::size_t> idx) {
    std::vector<Tokenization> batch;
    std::vector<double> targets;
    for (std::size_t i : idx) {
      batch.push_back(train[i].input);
      targets.insert(targets.end(), train[i].teacher.begin(), train[i].teacher.end());
    }
    Var lp = student.log_probs(g, PackedBatch::pack(batch), task);
    Tensor t = Tensor::from({targets.size() / C, C}, targets, lp.value().precision());
    return kd_loss(lp, t);
  };
  auto validate = [&] { return agreement(student, validation, task); };
  return train::fit(student.parameters(), train.size(), loss, validate, settings, job);
}

}  // namespace xlkd::distill
