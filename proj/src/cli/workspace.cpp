// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/cli/workspace.hpp"

#include <chrono>
#include <cctype>
#include <cstdio>
#include <set>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/seed.hpp"
#include "xlkd/eval/metrics.hpp"

namespace xlkd::cli {

namespace fs = std::filesystem;
using distill::PipelineOptions;
using distill::StageResult;
using eval::MetricsRow;
using eval::ReportRow;
using eval::RowGroup;
using synthlang::Corpus;
using tokenize::Tokenization;

namespace {

const std::vector<std::string> kLetters = [] {
  std::vector<std::string> out;
  for (char c = 'a'; c <= 'z'; ++c) out.emplace_back(1, c);
  return out;
}();

std::string pipeline_label(const PipelineOptions& o) {
  if (o.balanced && o.augment) return "+ Balanced + augmentation";
  if (o.balanced) return "+ Balanced distillation";
  if (o.augment) return "+ Data augmentation";
  return "2-step KD";
}

models::HeadType head_of(Task task) {
  return task == Task::kSentence ? models::HeadType::kSentence : models::HeadType::kWord;
}

std::vector<std::string> ids_of(const Corpus& c) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back(c.id(i));
  return out;
}

nlohmann::ordered_json fit_json(const train::FitResult& f) {
  return {{"best_epoch", f.best_epoch}, {"best_score", f.best_score}, {"epochs_run", f.log.size()},
          {"lr", f.lr},                 {"lr_fallback", f.lr_fallback}, {"steps", f.steps}};
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) { write_file(p, j.dump(2) + "\n"); }

nlohmann::ordered_json read_json(const fs::path& p) { return nlohmann::ordered_json::parse(read_file(p)); }

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

std::string slug(const std::string& text) {
  std::string out;
  bool dash = false;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (dash && !out.empty()) out += '-';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      dash = false;
    } else {
      dash = true;
    }
  }
  return out;
}

Workspace::Workspace(RunConfig config) : config_(std::move(config)) {
  auto langs = synthlang::LanguageSet::load(config_.languages.string());
  langs_ = std::make_unique<synthlang::LanguageSet>(config_.reorder ? std::move(langs) : langs.without_reorder());
  intents_ = langs_->grammar().intents();
  slots_ = langs_->grammar().slot_labels();
  log_ = [](const std::string& line) { std::fprintf(stderr, "[xlkd] %s\n", line.c_str()); };
  fs::create_directories(config_.out);
  const fs::path manifest = path("manifest.json");
  if (fs::exists(manifest)) {
    const auto old = read_json(manifest);
    if (old.value("config_hash", std::string()) != config_.hash())
      throw SchemaError("run directory " + config_.out.string() + " belongs to a different configuration");
  }
}

train::TrainSettings Workspace::settings() const {
  train::TrainSettings s = config_.train;
  s.seed = config_.seed;
  return s;
}

const std::vector<std::string>& Workspace::categories(Task task) const {
  return task == Task::kSentence ? intents_ : slots_;
}

nlohmann::ordered_json Workspace::gen_data() {
  Timer t;
  synthlang::Benchmark bench = synthlang::generate(*langs_, config_.data, config_.seed);
  const fs::path dir = path("data");
  synthlang::write_benchmark(bench, dir);
  nlohmann::ordered_json m;
  m["seed"] = config_.seed;
  m["reorder"] = config_.reorder;
  m["languages"] = langs_->ids();
  m["source"] = langs_->source();
  for (const auto& [lang, splits] : bench) {
    for (const auto& [split, corpus] : splits) {
      const fs::path file = dir / lang / (split + ".jsonl");
      m["splits"][lang][split] = {{"count", corpus.size()}, {"sha256", sha256_file(file)}};
    }
  }
  write_json(dir / "manifest.json", m);
  bench_.reset();
  log_("gen-data: " + std::to_string(bench.size()) + " languages (" + std::to_string(t.seconds()) + " s)");
  write_manifest();
  return m;
}

const synthlang::Benchmark& Workspace::benchmark() {
  if (!bench_) {
    if (!fs::exists(path("data/manifest.json")))
      throw Error("no data under " + config_.out.string() + ": run gen-data first");
    bench_ = synthlang::read_benchmark(path("data"));
    for (const std::string& lang : langs_->ids())
      for (auto split : synthlang::kSplits)
        if (!bench_->contains(lang) || !bench_->at(lang).contains(std::string(split)))
          throw Error("data: missing split " + lang + "/" + std::string(split));
  }
  return *bench_;
}

const SubwordVocab& Workspace::vocab(const std::string& lang) {
  auto it = vocabs_.find(lang);
  if (it != vocabs_.end()) return it->second;
  const fs::path file = path("vocab/" + lang + ".json");
  if (fs::exists(file)) return vocabs_.emplace(lang, SubwordVocab::load(file)).first->second;
  const auto& splits = benchmark().at(lang);
  std::vector<Corpus> text = {splits.at("unannotated_train").unlabeled_view()};
  if (lang == langs_->source()) text.push_back(splits.at("annotated_train").unlabeled_view());
  SubwordVocab v = SubwordVocab::train(text, config_.vocab_size, lang, kLetters);
  v.save(file);
  return vocabs_.emplace(lang, std::move(v)).first->second;
}

const SubwordVocab& Workspace::shared_vocab() {
  if (shared_) return *shared_;
  const fs::path file = path("vocab/shared.json");
  if (fs::exists(file)) {
    shared_ = SubwordVocab::load(file);
    return *shared_;
  }
  std::vector<Corpus> text;
  for (const std::string& lang : langs_->ids())
    text.push_back(synthlang::pretraining_corpus(*langs_, lang, config_.pivot.sentences_per_language, config_.seed));
  shared_ = SubwordVocab::train(text, config_.shared_vocab_size, "shared", kLetters);
  shared_->save(file);
  return *shared_;
}

const EncoderModel& Workspace::pivot(int size) {
  auto it = pivots_.find(size);
  if (it != pivots_.end()) return it->second;
  const std::string name = "pivot/pivot-p" + std::to_string(size);
  const fs::path file = path(name + ".json");
  if (fs::exists(file)) return pivots_.emplace(size, EncoderModel::load(file)).first->second;
  Timer t;
  const SubwordVocab& shared = shared_vocab();
  std::vector<Tokenization> inputs;
  for (const std::string& lang : langs_->ids()) {
    Corpus text = synthlang::pretraining_corpus(*langs_, lang, config_.pivot.sentences_per_language, config_.seed);
    auto enc = tokenize::encode_corpus(shared, text);
    inputs.insert(inputs.end(), enc.begin(), enc.end());
  }
  Rng order = make_rng(config_.seed, "pivot/order");
  shuffle(inputs.begin(), inputs.end(), order);
  train::PretrainSettings ps = config_.pivot.pretrain;
  ps.seed = derive_seed(config_.seed, name);
  train::PretrainResult r = train::pivot_pretrain(models::pivot_config(shared.size(), size), inputs,
                                                  config_.pivot.heldout, ps);
  r.model.set_vocab_hash(shared.hash());
  r.model.save(file);
  write_json(path(name + ".record.json"), {{"size", size},
                                           {"parameters", r.model.num_parameters()},
                                           {"inputs", inputs.size()},
                                           {"heldout", config_.pivot.heldout},
                                           {"masked_accuracy", r.masked_accuracy},
                                           {"losses", r.losses},
                                           {"model_sha256", r.model.param_hash()}});
  log_("pivot p" + std::to_string(size) + ": masked accuracy " + std::to_string(r.masked_accuracy) + " (" +
       std::to_string(t.seconds()) + " s)");
  return pivots_.emplace(size, std::move(r.model)).first->second;
}

const EncoderModel& Workspace::source(Task task, Family arch) {
  const std::string key = models::to_string(task) + "-" + models::to_string(arch);
  auto it = sources_.find(key);
  if (it != sources_.end()) return it->second;
  const fs::path file = path("source/" + key + ".json");
  if (!fs::exists(file)) throw Error("no source model " + key + ": run train-source first");
  return sources_.emplace(key, EncoderModel::load(file)).first->second;
}

distill::TransferData Workspace::transfer_data() {
  const auto& b = benchmark();
  const std::string& src = langs_->source();
  distill::TransferData d;
  d.src = b.at(src).at("unannotated_train").unlabeled_view();
  d.src_validation = b.at(src).at("validation").unlabeled_view();
  for (const std::string& lang : langs_->targets()) {
    d.tgt[lang] = b.at(lang).at("unannotated_train").unlabeled_view();
    d.tgt_validation[lang] = b.at(lang).at("validation").unlabeled_view();
  }
  return d;
}

distill::TargetSpec Workspace::target_spec(Task task, Family arch) {
  distill::TargetSpec spec{models::edge_config(arch, head_of(task), 0), {}};
  for (const std::string& lang : langs_->targets()) spec.vocabs[lang] = &vocab(lang);
  return spec;
}

double Workspace::evaluate(const EncoderModel& model, const SubwordVocab& vocab, const std::string& lang, Task task) {
  const Corpus& test = benchmark().at(lang).at("test");
  Corpus view = test.unlabeled_view();
  models::PredictionSet p = model.predict(tokenize::encode_corpus(vocab, view), ids_of(view), task);
  return task == Task::kSentence ? eval::accuracy(p, test) : eval::span_f1(p, test).f1();
}

double Workspace::evaluate(const fs::path& model_path, const std::string& lang, Task task) {
  EncoderModel m = EncoderModel::load(model_path);
  if (m.vocab_hash() == shared_vocab().hash()) return evaluate(m, shared_vocab(), lang, task);
  if (m.vocab_hash() == vocab(lang).hash()) return evaluate(m, vocab(lang), lang, task);
  throw Error(model_path.string() + " does not use the " + lang + " or the shared vocabulary");
}

MetricsRow Workspace::score_targets(const std::string& name, Task task,
                                    const std::map<std::string, const EncoderModel*>& models, bool shared) {
  MetricsRow row{name, models::to_string(task), {}, std::nullopt};
  for (const auto& [lang, m] : models) row.scores[lang] = evaluate(*m, shared ? shared_vocab() : vocab(lang), lang, task);
  return row;
}

void Workspace::save_row(const ReportRow& row, const nlohmann::ordered_json& record) {
  const std::string name = slug(row.key());
  write_json(path("rows/" + name + ".json"), row.to_json());
  write_json(path("jobs/" + name + ".json"), record);
}

GateCounts Workspace::gate() const {
  GateCounts g;
  if (!bench_) return g;
  for (const auto& [lang, splits] : *bench_) {
    for (const auto& [split, corpus] : splits) {
      g.denied += corpus.ledger().denied;
      if (split == "test") continue;
      g.successful += corpus.ledger().successful;
      if (split == "unannotated_train") g.unannotated += corpus.ledger().successful;
    }
  }
  return g;
}

CommandResult Workspace::guarded(const std::string& what, const std::vector<std::string>& allowed,
                                 const std::function<CommandResult()>& body) {
  benchmark();
  std::map<std::string, uint64_t> before;
  for (const auto& [lang, splits] : *bench_)
    for (const auto& [split, corpus] : splits) before[lang + "/" + split] = corpus.ledger().successful;
  const GateCounts start = gate();
  Timer t;
  CommandResult r = body();
  const GateCounts end = gate();
  r.gate = {end.successful - start.successful, end.unannotated - start.unannotated, end.denied - start.denied};
  std::string violations;
  for (const auto& [lang, splits] : *bench_) {
    for (const auto& [split, corpus] : splits) {
      const std::string key = lang + "/" + split;
      const uint64_t reads = corpus.ledger().successful - before[key];
      if (reads == 0 || split == "test") continue;
      if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
      violations += " " + key + "=" + std::to_string(reads);
    }
  }
  log_(what + ": " + std::to_string(t.seconds()) + " s; label reads outside test: " + std::to_string(r.gate.successful) +
       " (unannotated " + std::to_string(r.gate.unannotated) + "), denied " + std::to_string(r.gate.denied));
  write_manifest();
  if (!violations.empty()) throw GateViolation(what + ": label reads on" + violations);
  return r;
}

CommandResult Workspace::train_source(Task task, Family arch) {
  const std::string& src = langs_->source();
  return guarded("train-source " + models::to_string(task) + " " + models::to_string(arch),
                 {src + "/annotated_train", src + "/validation"}, [&] {
    const std::string key = models::to_string(task) + "-" + models::to_string(arch);
    const fs::path file = path("source/" + key + ".json");
    const auto& b = benchmark().at(src);
    const SubwordVocab& v = vocab(src);
    nlohmann::ordered_json record;
    if (!fs::exists(file)) {
      models::ArchConfig cfg = models::edge_config(arch, head_of(task), v.size());
      (task == Task::kSentence ? cfg.sentence_labels : cfg.word_labels) = categories(task);
      EncoderModel m = EncoderModel::build(cfg, derive_seed(config_.seed, "source/" + key));
      m.set_vocab_hash(v.hash());
      const Corpus& train = b.at("annotated_train");
      const Corpus& validation = b.at("validation");
      auto val_inputs = tokenize::encode_corpus(v, validation.unlabeled_view());
      auto validate = [&]() -> double {
        models::PredictionSet p = m.predict(val_inputs, ids_of(validation), task);
        return task == Task::kSentence ? eval::accuracy(p, validation) : eval::span_f1(p, validation).f1();
      };
      train::FitResult fit = train::train_supervised(m, tokenize::encode_corpus(v, train.unlabeled_view()),
                                                     train::gold_targets(train, task, categories(task)), task,
                                                     validate, settings(), "source/" + key);
      m.save(file);
      record["fit"] = fit_json(fit);
      write_json(path("source/" + key + ".record.json"), record);
      sources_.erase(key);
    } else {
      record = read_json(path("source/" + key + ".record.json"));
    }
    const EncoderModel& m = source(task, arch);
    ReportRow row;
    row.group = RowGroup::kSource;
    row.label = "Off-the-shelf source";
    row.source_arch = models::to_string(arch);
    row.metrics = {"source " + key, models::to_string(task), {}, evaluate(m, v, src, task)};
    record["command"] = "train-source";
    record["model"] = {{"path", file.lexically_relative(config_.out).string()},
                       {"sha256", m.param_hash()},
                       {"parameters", m.num_parameters()}};
    save_row(row, record);
    return CommandResult{{row}, record, {}};
  });
}

const StageResult& Workspace::stage1(Task task, Family arch, bool balanced, int pivot_size) {
  const std::string key = models::to_string(task) + "-" + models::to_string(arch) + "-" +
                          (balanced ? "balanced" : "naive") + "-p" + std::to_string(pivot_size);
  auto it = stage1_.find(key);
  if (it != stage1_.end()) return it->second;
  const fs::path file = path("stage1/" + key + ".json");
  if (fs::exists(file)) return stage1_.emplace(key, StageResult{EncoderModel::load(file), {}}).first->second;
  Timer t;
  const EncoderModel& teacher = source(task, arch);
  const EncoderModel& pre = pivot(pivot_size);
  distill::TransferData data = transfer_data();
  std::vector<Corpus> translated;
  if (balanced)
    for (const std::string& lang : langs_->targets()) translated.push_back(synthlang::translate(*langs_, data.src, lang));
  StageResult r = distill::kd_stage1({teacher, vocab(langs_->source())}, {pre, shared_vocab()}, task, data, translated,
                                     settings(), "kd1/" + key);
  r.model.save(file);
  nlohmann::ordered_json record = {{"teacher_sha256", teacher.param_hash()},
                                   {"pivot_sha256", pre.param_hash()},
                                   {"student_sha256", r.model.param_hash()},
                                   {"fit", fit_json(r.fit)}};
  record["corpora"].push_back({{"name", data.src.name()}, {"sha256", distill::corpus_hash(data.src)}});
  for (const Corpus& c : translated) record["corpora"].push_back({{"name", c.name()}, {"sha256", distill::corpus_hash(c)}});
  write_json(path("stage1/" + key + ".record.json"), record);
  log_("kd1 " + key + ": agreement " + std::to_string(r.fit.best_score) + " (" + std::to_string(t.seconds()) + " s)");
  return stage1_.emplace(key, std::move(r)).first->second;
}

double Workspace::kd1_agreement(Task task, Family arch, bool balanced, int pivot_size) {
  const StageResult& s1 = stage1(task, arch, balanced, pivot_size);
  const std::string& src = langs_->source();
  Corpus heldout = benchmark().at(src).at("test").unlabeled_view();
  distill::TeacherCache cache = distill::teacher_cache(source(task, arch), vocab(src), heldout, task);
  auto examples = distill::kd_examples(heldout, shared_vocab(), cache);
  return distill::agreement(s1.model, examples, task);
}

CommandResult Workspace::pipeline(Task task, Family arch, Family target_arch, const PipelineOptions& options,
                                  int pivot_size) {
  const std::string what = "pipeline " + models::to_string(task) + " " + models::to_string(arch) + "->" +
                           models::to_string(target_arch) + " " + pipeline_label(options) + " p" +
                           std::to_string(pivot_size);
  return guarded(what, {}, [&] {
    if (options.balanced && task == Task::kWord) throw Error("balanced distillation is not applied to the word task");
    const StageResult& s1 = stage1(task, arch, options.balanced, pivot_size);
    ReportRow row;
    row.group = RowGroup::kOurs;
    row.label = pipeline_label(options);
    row.source_arch = models::to_string(arch);
    row.target_arch = models::to_string(target_arch);
    row.pivot_size = pivot_size;
    row.metrics.task = models::to_string(task);
    const std::string name = slug(row.key());

    std::map<std::string, EncoderModel> targets;
    bool cached = true;
    for (const std::string& lang : langs_->targets()) cached = cached && fs::exists(path("models/" + name + "/" + lang + ".json"));
    nlohmann::ordered_json record;
    if (cached) {
      for (const std::string& lang : langs_->targets())
        targets.emplace(lang, EncoderModel::load(path("models/" + name + "/" + lang + ".json")));
      record = read_json(path("jobs/" + name + ".json"));
    } else {
      auto results = distill::transfer_to_targets(*langs_, s1.model, shared_vocab(), target_spec(task, target_arch), task,
                                                  transfer_data(), options.augment, settings(), "kd2/" + name);
      record["command"] = "pipeline";
      record["options"] = {{"balanced", options.balanced}, {"augment", options.augment}};
      record["stage1_sha256"] = s1.model.param_hash();
      for (auto& [lang, r] : results) {
        r.model.save(path("models/" + name + "/" + lang + ".json"));
        record["stage2"][lang] = {{"sha256", r.model.param_hash()}, {"fit", fit_json(r.fit)}};
        targets.emplace(lang, std::move(r.model));
      }
    }
    std::map<std::string, const EncoderModel*> ptrs, pivots;
    for (const auto& [lang, m] : targets) {
      ptrs[lang] = &m;
      pivots[lang] = &s1.model;
    }
    row.metrics = score_targets(row.label, task, ptrs, false);
    row.stage1 = score_targets("stage-1 pivot", task, pivots, true);
    row.stage1->source_score = evaluate(s1.model, shared_vocab(), langs_->source(), task);
    record["kd1_agreement"] = kd1_agreement(task, arch, options.balanced, pivot_size);
    save_row(row, record);
    return CommandResult{{row}, record, {}};
  });
}

CommandResult Workspace::pipeline_grid(Task task, int pivot_size) {
  CommandResult all;
  for (const char* s : eval::kArchOrder) {
    for (const char* t : eval::kArchOrder) {
      CommandResult r = pipeline(task, models::parse_family(s), models::parse_family(t), {}, pivot_size);
      all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
      all.record[std::string(s) + "->" + t] = r.record;
      all.gate.successful += r.gate.successful;
      all.gate.unannotated += r.gate.unannotated;
      all.gate.denied += r.gate.denied;
    }
  }
  return all;
}

CommandResult Workspace::translate_test(Task task, Family arch) {
  return guarded("baseline translate-test " + models::to_string(task) + " " + models::to_string(arch), {}, [&] {
    const EncoderModel& m = source(task, arch);
    const distill::SourceModel src{m, vocab(langs_->source())};
    ReportRow row;
    row.group = RowGroup::kBaseline;
    row.label = "Translate-test";
    row.source_arch = row.target_arch = models::to_string(arch);
    row.metrics = {row.label, models::to_string(task), {}, std::nullopt};
    nlohmann::ordered_json record = {{"command", "baseline translate-test"}, {"source_sha256", m.param_hash()}};
    for (const std::string& lang : langs_->targets()) {
      const Corpus& test = benchmark().at(lang).at("test");
      distill::TranslateTestResult r = distill::translate_test(*langs_, src, test.unlabeled_view(), task);
      row.metrics.scores[lang] =
          task == Task::kSentence ? eval::accuracy(r.predictions, test) : eval::span_f1(r.predictions, test).f1();
      record["passes_per_example"] = r.passes_per_example;
    }
    save_row(row, record);
    return CommandResult{{row}, record, {}};
  });
}

CommandResult Workspace::translate_train_pseudo(Task task, Family arch, Family target_arch) {
  const std::string what = "baseline translate-train-pseudo " + models::to_string(task) + " " + models::to_string(arch) +
                           "->" + models::to_string(target_arch);
  return guarded(what, {}, [&] {
    const EncoderModel& m = source(task, arch);
    const distill::SourceModel src{m, vocab(langs_->source())};
    ReportRow row;
    row.group = RowGroup::kBaseline;
    row.label = "Translate-train-pseudo";
    row.source_arch = models::to_string(arch);
    row.target_arch = models::to_string(target_arch);
    row.metrics.task = models::to_string(task);
    const std::string name = slug(row.key());
    nlohmann::ordered_json record = {{"command", "baseline translate-train-pseudo"}, {"source_sha256", m.param_hash()}};
    const fs::path job = path("jobs/" + name + ".json");
    if (fs::exists(job)) record = read_json(job);
    std::map<std::string, EncoderModel> targets;
    distill::TransferData data = transfer_data();
    for (const std::string& lang : langs_->targets()) {
      const fs::path file = path("models/" + name + "/" + lang + ".json");
      if (fs::exists(file)) {
        targets.emplace(lang, EncoderModel::load(file));
        continue;
      }
      StageResult r = distill::translate_train_pseudo(*langs_, src, data, lang,
                                                      models::edge_config(target_arch, head_of(task), 0), vocab(lang),
                                                      task, settings(), "ttp/" + name + "/" + lang);
      r.model.save(file);
      record["models"][lang] = {{"sha256", r.model.param_hash()}, {"fit", fit_json(r.fit)}};
      targets.emplace(lang, std::move(r.model));
    }
    std::map<std::string, const EncoderModel*> ptrs;
    for (const auto& [lang, t] : targets) ptrs[lang] = &t;
    row.metrics = score_targets(row.label, task, ptrs, false);
    save_row(row, record);
    return CommandResult{{row}, record, {}};
  });
}

CommandResult Workspace::gold_supervised(Task task, Family target_arch, int pivot_size) {
  const std::string& src = langs_->source();
  const std::string what =
      "reference gold-supervised " + models::to_string(task) + " " + models::to_string(target_arch) + " p" +
      std::to_string(pivot_size);
  return guarded(what, {src + "/annotated_train", src + "/validation"}, [&] {
    const std::string key = "gold-" + models::to_string(task) + "-p" + std::to_string(pivot_size);
    auto it = stage1_.find(key);
    if (it == stage1_.end()) {
      const fs::path file = path("stage1/" + key + ".json");
      if (fs::exists(file)) {
        it = stage1_.emplace(key, StageResult{EncoderModel::load(file), {}}).first;
      } else {
        const auto& b = benchmark().at(src);
        StageResult r = distill::gold_supervised_stage1({pivot(pivot_size), shared_vocab()}, b.at("annotated_train"),
                                                        b.at("validation"), task, categories(task), settings(),
                                                        "gold/" + key);
        r.model.save(file);
        write_json(path("stage1/" + key + ".record.json"),
                   {{"student_sha256", r.model.param_hash()}, {"fit", fit_json(r.fit)}});
        it = stage1_.emplace(key, std::move(r)).first;
      }
    }
    const StageResult& s1 = it->second;
    // Stage 2 is label-free: nothing below may read labels outside test.
    const GateCounts before = gate();
    ReportRow row;
    row.group = RowGroup::kReference;
    row.label = "Gold-supervised target";
    row.target_arch = models::to_string(target_arch);
    row.pivot_size = pivot_size;
    row.metrics.task = models::to_string(task);
    const std::string name = slug(row.key());
    std::map<std::string, EncoderModel> targets;
    nlohmann::ordered_json record = {{"command", "reference gold-supervised"}, {"stage1_sha256", s1.model.param_hash()}};
    bool cached = true;
    for (const std::string& lang : langs_->targets()) cached = cached && fs::exists(path("models/" + name + "/" + lang + ".json"));
    if (cached) {
      for (const std::string& lang : langs_->targets())
        targets.emplace(lang, EncoderModel::load(path("models/" + name + "/" + lang + ".json")));
      record = read_json(path("jobs/" + name + ".json"));
    } else {
      auto results = distill::transfer_to_targets(*langs_, s1.model, shared_vocab(), target_spec(task, target_arch), task,
                                                  transfer_data(), false, settings(), "kd2/" + name);
      for (auto& [lang, r] : results) {
        r.model.save(path("models/" + name + "/" + lang + ".json"));
        record["stage2"][lang] = {{"sha256", r.model.param_hash()}, {"fit", fit_json(r.fit)}};
        targets.emplace(lang, std::move(r.model));
      }
    }
    if (gate().successful != before.successful) throw GateViolation(what + ": label reads in the second step");
    std::map<std::string, const EncoderModel*> ptrs, pivots;
    for (const auto& [lang, m] : targets) {
      ptrs[lang] = &m;
      pivots[lang] = &s1.model;
    }
    row.metrics = score_targets(row.label, task, ptrs, false);
    row.stage1 = score_targets("gold pivot", task, pivots, true);
    row.stage1->source_score = evaluate(s1.model, shared_vocab(), src, task);
    save_row(row, record);
    return CommandResult{{row}, record, {}};
  });
}

eval::ExperimentReport Workspace::report() {
  std::vector<ReportRow> rows;
  const fs::path dir = path("rows");
  if (fs::exists(dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) rows.push_back(ReportRow::from_json(read_json(f)));
  }
  if (rows.empty()) throw Error("no report rows under " + config_.out.string());
  std::set<std::pair<std::string, int>> grid_keys;
  for (const auto& r : rows)
    if (r.label == "2-step KD") grid_keys.insert({r.metrics.task, r.pivot_size});
  std::vector<eval::TransferGrid> grids;
  for (const auto& [task, size] : grid_keys) grids.push_back(eval::build_grid(rows, task, size));
  eval::ExperimentReport rep = eval::build_report(std::move(rows), std::move(grids));
  write_file(path("report.json"), rep.to_json().dump(2) + "\n");
  write_file(path("report.md"), rep.markdown());
  const std::string csv = rep.grid_csv();
  if (csv.empty()) fs::remove(path("grid.csv"));
  else write_file(path("grid.csv"), csv);
  write_manifest();
  return rep;
}

void Workspace::write_manifest() const {
  nlohmann::ordered_json m;
  m["config"] = config_.to_json();
  m["config_hash"] = config_.hash();
  m["seed"] = config_.seed;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(config_.out))
    if (e.is_regular_file() && e.path() != path("manifest.json")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  m["artifacts"] = nlohmann::ordered_json::object();
  for (const auto& f : files) m["artifacts"][f.lexically_relative(config_.out).string()] = sha256_file(f);
  write_json(path("manifest.json"), m);
}

}  // namespace xlkd::cli
