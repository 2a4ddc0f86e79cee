// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/distill/pipeline.hpp"

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"
#include "xlkd/common/seed.hpp"
#include "xlkd/synthlang/benchmark.hpp"
#include "xlkd/train/supervised.hpp"

namespace xlkd::distill {

namespace {

const std::vector<std::string>& head_labels(const models::ArchConfig& c, Task task) {
  return task == Task::kSentence ? c.sentence_labels : c.word_labels;
}

models::ArchConfig with_head(models::ArchConfig arch, Task task, const std::vector<std::string>& labels) {
  arch.head = task == Task::kSentence ? models::HeadType::kSentence : models::HeadType::kWord;
  arch.sentence_labels.clear();
  arch.word_labels.clear();
  (task == Task::kSentence ? arch.sentence_labels : arch.word_labels) = labels;
  return arch;
}

void append(std::vector<KdExample>& to, std::vector<KdExample> from) {
  to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

std::vector<std::string> ids_of(const Corpus& c) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back(c.id(i));
  return out;
}

// Hard labels from a prediction set as category indices per example.
std::vector<std::vector<int>> argmax_labels(const PredictionSet& p) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<int> row;
    for (std::size_t r = 0; r < p.rows(i); ++r) row.push_back(static_cast<int>(p.argmax(i, r)));
    out.push_back(std::move(row));
  }
  return out;
}

int index_of(const std::vector<std::string>& categories, const std::string& label) {
  auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) throw Error("label " + label + " is not a model category");
  return static_cast<int>(it - categories.begin());
}

// Pseudo-labeled, translated copy of `src` as one-hot examples.
std::vector<KdExample> pseudo_examples(const LanguageSet& langs, const SourceModel& source, const Corpus& src,
                                       const std::string& lang, const SubwordVocab& target_vocab, Task task) {
  const auto& categories = head_labels(source.model.config(), task);
  PredictionSet p = source.model.predict(tokenize::encode_corpus(source.vocab, src), ids_of(src), task);
  Corpus translated = synthlang::translate(langs, src, lang);
  std::vector<KdExample> out;
  for (std::size_t i = 0; i < translated.size(); ++i) {
    std::vector<int> labels;
    if (task == Task::kSentence) {
      labels.push_back(static_cast<int>(p.argmax(i)));
    } else {
      for (const std::string& tag : synthlang::project_tags(p.labels(i), translated.alignment(i)))
        labels.push_back(index_of(categories, tag));
    }
    out.push_back({target_vocab.encode(translated.words(i), true), one_hot(labels, categories.size())});
  }
  return out;
}

void require_unlabeled(const Corpus& c) {
  if (c.labels_visible()) throw Error("transfer corpus " + c.name() + " must be an unlabeled view");
}

}  // namespace

std::vector<double> one_hot(std::span<const int> labels, std::size_t categories) {
  std::vector<double> out(labels.size() * categories, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) out[r * categories + static_cast<std::size_t>(labels[r])] = 1.0;
  return out;
}

std::string corpus_hash(const Corpus& corpus) { return sha256_hex(synthlang::to_jsonl(corpus)); }

StageResult kd_stage1(const SourceModel& source, const Pivot& pivot, Task task, const TransferData& data,
                      const std::vector<Corpus>& translated, const train::TrainSettings& settings,
                      std::string_view job) {
  if (task == Task::kWord && !translated.empty())
    throw Error("balanced distillation is not applied to the word task");
  require_unlabeled(data.src);
  require_unlabeled(data.src_validation);
  const std::string teacher_before = source.model.param_hash();
  const auto& categories = head_labels(source.model.config(), task);

  TeacherCache cache = teacher_cache(source.model, source.vocab, data.src, task);
  TeacherCache val_cache = teacher_cache(source.model, source.vocab, data.src_validation, task);
  std::vector<KdExample> examples = kd_examples(data.src, pivot.vocab, cache);
  for (const Corpus& t : translated) append(examples, kd_examples_by_origin(t, pivot.vocab, cache));
  std::vector<KdExample> validation = kd_examples(data.src_validation, pivot.vocab, val_cache);

  StageResult out{pivot.pretrained, {}};
  out.model.reset_head(task, categories, derive_seed(settings.seed, std::string(job) + "/head"));
  out.fit = distill(out.model, task, categories, examples, validation, settings, job);
  if (source.model.param_hash() != teacher_before) throw Error(std::string(job) + ": teacher parameters changed");
  return out;
}

StageResult kd_stage2(const EncoderModel& pivot, const SubwordVocab& pivot_vocab, Task task,
                      const models::ArchConfig& target_arch, const SubwordVocab& target_vocab, const Corpus& tgt,
                      const Corpus& tgt_validation, const std::optional<Corpus>& paraphrases,
                      const train::TrainSettings& settings, std::string_view job) {
  require_unlabeled(tgt);
  require_unlabeled(tgt_validation);
  const std::string teacher_before = pivot.param_hash();
  const auto& categories = head_labels(pivot.config(), task);

  std::vector<KdExample> examples = kd_examples(tgt, target_vocab, teacher_cache(pivot, pivot_vocab, tgt, task));
  if (paraphrases) {
    require_unlabeled(*paraphrases);
    append(examples, kd_examples(*paraphrases, target_vocab, teacher_cache(pivot, pivot_vocab, *paraphrases, task)));
  }
  std::vector<KdExample> validation =
      kd_examples(tgt_validation, target_vocab, teacher_cache(pivot, pivot_vocab, tgt_validation, task));

  models::ArchConfig arch = with_head(target_arch, task, categories);
  arch.vocab_size = target_vocab.size();
  StageResult out{EncoderModel::build(arch, derive_seed(settings.seed, std::string(job) + "/init")), {}};
  out.model.set_vocab_hash(target_vocab.hash());
  out.fit = distill(out.model, task, categories, examples, validation, settings, job);
  if (pivot.param_hash() != teacher_before) throw Error(std::string(job) + ": teacher parameters changed");
  return out;
}

std::map<std::string, StageResult> transfer_to_targets(const LanguageSet& langs, const EncoderModel& stage1,
                                                       const SubwordVocab& pivot_vocab, const TargetSpec& target,
                                                       Task task, const TransferData& data, bool augment,
                                                       const train::TrainSettings& settings, std::string_view job) {
  std::map<std::string, StageResult> out;
  for (const std::string& lang : langs.targets()) {
    auto vocab = target.vocabs.find(lang);
    if (vocab == target.vocabs.end() || vocab->second == nullptr) throw Error("no target vocabulary for " + lang);
    const std::string name = std::string(job) + "/kd2/" + lang;
    std::optional<Corpus> para;
    if (augment) para = synthlang::paraphrase(langs, data.tgt.at(lang), derive_seed(settings.seed, name + "/paraphrase"));
    out.emplace(lang, kd_stage2(stage1, pivot_vocab, task, target.arch, *vocab->second, data.tgt.at(lang),
                                data.tgt_validation.at(lang), para, settings, name));
  }
  return out;
}

PipelineResult freetransfer_pipeline(const LanguageSet& langs, const SourceModel& source, const Pivot& pivot,
                                     const TargetSpec& target, Task task, const TransferData& data,
                                     const PipelineOptions& options, const train::TrainSettings& settings,
                                     std::string_view job) {
  if (options.balanced && task == Task::kWord) throw Error("balanced distillation is not applied to the word task");
  std::vector<Corpus> translated;
  if (options.balanced)
    for (const std::string& lang : langs.targets()) translated.push_back(synthlang::translate(langs, data.src, lang));

  const std::string name(job);
  PipelineResult out{kd_stage1(source, pivot, task, data, translated, settings, name + "/kd1"), {}, {}};
  out.stage2 = transfer_to_targets(langs, out.stage1.model, pivot.vocab, target, task, data, options.augment, settings, name);

  auto& m = out.manifest;
  m["job"] = name;
  m["task"] = models::to_string(task);
  m["options"] = {{"balanced", options.balanced}, {"augment", options.augment}};
  m["settings"] = settings.to_json();
  m["source_model"] = source.model.param_hash();
  m["pivot_pretrained"] = pivot.pretrained.param_hash();
  nlohmann::ordered_json kd1 = {{"stage", "kd1"},
                                {"teacher", source.model.param_hash()},
                                {"student", out.stage1.model.param_hash()},
                                {"best_epoch", out.stage1.fit.best_epoch},
                                {"lr", out.stage1.fit.lr}};
  kd1["corpora"].push_back({{"name", data.src.name()}, {"sha256", corpus_hash(data.src)}});
  for (const Corpus& t : translated) kd1["corpora"].push_back({{"name", t.name()}, {"sha256", corpus_hash(t)}});
  m["stages"].push_back(kd1);
  for (const auto& [lang, r] : out.stage2) {
    m["stages"].push_back({{"stage", "kd2"},
                           {"lang", lang},
                           {"teacher", out.stage1.model.param_hash()},
                           {"student", r.model.param_hash()},
                           {"best_epoch", r.fit.best_epoch},
                           {"lr", r.fit.lr},
                           {"corpus", {{"name", data.tgt.at(lang).name()}, {"sha256", corpus_hash(data.tgt.at(lang))}}}});
  }
  return out;
}

TranslateTestResult translate_test(const LanguageSet& langs, const SourceModel& source, const Corpus& target, Task task) {
  Corpus view = target.unlabeled_view();
  Corpus translated = synthlang::translate(langs, view, langs.source());
  TranslateTestResult out;
  out.predictions = source.model.predict(tokenize::encode_corpus(source.vocab, translated), ids_of(view), task);
  if (task == Task::kWord) {
    PredictionSet& p = out.predictions;
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto align = translated.alignment(i);  // source word j came from target word align[j]
      std::vector<std::size_t> back(align.size());
      for (std::size_t j = 0; j < align.size(); ++j) back[align[j]] = j;
      std::vector<int> labels;
      for (const std::string& tag : synthlang::project_tags(p.labels(i), back))
        labels.push_back(index_of(p.categories, tag));
      p.probs[i] = one_hot(labels, p.num_categories());
    }
  }
  return out;
}

StageResult translate_train_pseudo(const LanguageSet& langs, const SourceModel& source, const TransferData& data,
                                   const std::string& lang, const models::ArchConfig& target_arch,
                                   const SubwordVocab& target_vocab, Task task, const train::TrainSettings& settings,
                                   std::string_view job) {
  require_unlabeled(data.src);
  require_unlabeled(data.src_validation);
  const auto& categories = head_labels(source.model.config(), task);
  auto examples = pseudo_examples(langs, source, data.src, lang, target_vocab, task);
  auto validation = pseudo_examples(langs, source, data.src_validation, lang, target_vocab, task);
  models::ArchConfig arch = with_head(target_arch, task, categories);
  arch.vocab_size = target_vocab.size();
  StageResult out{EncoderModel::build(arch, derive_seed(settings.seed, std::string(job) + "/init")), {}};
  out.model.set_vocab_hash(target_vocab.hash());
  out.fit = distill(out.model, task, categories, examples, validation, settings, job);
  return out;
}

StageResult gold_supervised_stage1(const Pivot& pivot, const Corpus& annotated, const Corpus& validation, Task task,
                                   std::span<const std::string> categories, const train::TrainSettings& settings,
                                   std::string_view job) {
  auto to_examples = [&](const Corpus& c) {
    train::Targets gold = train::gold_targets(c, task, categories);
    std::vector<KdExample> out;
    for (std::size_t i = 0; i < c.size(); ++i)
      out.push_back({pivot.vocab.encode(c.words(i), true), one_hot(gold[i], categories.size())});
    return out;
  };
  auto examples = to_examples(annotated);
  auto val = to_examples(validation);
  StageResult out{pivot.pretrained, {}};
  out.model.reset_head(task, {categories.begin(), categories.end()}, derive_seed(settings.seed, std::string(job) + "/head"));
  out.fit = distill(out.model, task, categories, examples, val, settings, job);
  return out;
}

}  // namespace xlkd::distill
