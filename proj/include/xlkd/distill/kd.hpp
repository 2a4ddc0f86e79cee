// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xlkd/models/model.hpp"
#include "xlkd/synthlang/corpus.hpp"
#include "xlkd/tokenize/bpe.hpp"
#include "xlkd/train/fit.hpp"

namespace xlkd::distill {

using models::EncoderModel;
using models::PredictionSet;
using models::Task;
using synthlang::Corpus;
using tokenize::SubwordVocab;
using tokenize::Tokenization;

// sum_i p_i log(p_i / q_i), natural log; p_i = 0 terms drop out, q floored
// at 1e-12. Both inputs must sum to 1 within 1e-5.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Mean KL over rows (sentences, or words at their first subwords). Word-task
// sets must cover the same words example by example.
double kd_loss(const PredictionSet& teacher, const PredictionSet& student);

// Differentiable form: mean over rows of KL(teacher row || exp(student row)).
numeric::Var kd_loss(numeric::Var student_log_probs, const numeric::Tensor& teacher_probs);

// Frozen-teacher output distributions keyed by example id.
class TeacherCache {
 public:
  TeacherCache() = default;
  explicit TeacherCache(PredictionSet predictions);

  Task task() const { return set_.task; }
  const std::vector<std::string>& categories() const { return set_.categories; }
  std::size_t size() const { return set_.size(); }
  bool contains(const std::string& id) const { return index_.contains(id); }
  // Row-major [rows x categories].
  const std::vector<double>& at(const std::string& id) const;
  const PredictionSet& predictions() const { return set_; }

  std::string to_jsonl() const;
  static TeacherCache parse_jsonl(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static TeacherCache load(const std::filesystem::path& path);

 private:
  PredictionSet set_;
  std::map<std::string, std::size_t> index_;
};

// Runs the teacher in eval mode over an unlabeled corpus.
TeacherCache teacher_cache(const EncoderModel& teacher, const SubwordVocab& vocab, const Corpus& corpus, Task task);

struct KdExample {
  Tokenization input;
  std::vector<double> teacher;  // [rows x categories]
};

// Student inputs for `corpus` under `vocab`, each paired with the cached
// teacher rows of `id_of(i)`.
std::vector<KdExample> kd_examples(const Corpus& corpus, const SubwordVocab& vocab, const TeacherCache& cache);
// Same, but each example takes the teacher rows of its origin (translated
// copies reuse the source-side distributions).
std::vector<KdExample> kd_examples_by_origin(const Corpus& corpus, const SubwordVocab& vocab, const TeacherCache& cache);

// Share of rows where the student argmax equals the teacher argmax.
double agreement(const EncoderModel& student, std::span<const KdExample> examples, Task task);

// Minimizes kd_loss over `train`; checkpoints on agreement over `validation`.
// `categories` are the teacher's and must equal the student head's.
train::FitResult distill(EncoderModel& student, Task task, std::span<const std::string> categories,
                         std::span<const KdExample> train,
                         std::span<const KdExample> validation, const train::TrainSettings& settings,
                         std::string_view job);

}  // namespace xlkd::distill
