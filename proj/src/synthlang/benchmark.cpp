// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/synthlang/benchmark.hpp"

#include <algorithm>
#include <cstdio>

#include "xlkd/common/error.hpp"
#include "xlkd/common/seed.hpp"
#include "xlkd/synthlang/bio.hpp"

namespace xlkd::synthlang {

SplitSizes SplitSizes::balanced(std::size_t train, std::size_t validation, std::size_t test) {
  return {train - train / 2, train / 2, validation, test};
}

std::size_t SplitSizes::of(std::string_view split) const {
  if (split == "annotated_train") return annotated_train;
  if (split == "unannotated_train") return unannotated_train;
  if (split == "validation") return validation;
  if (split == "test") return test;
  throw Error("unknown split '" + std::string(split) + "'");
}

std::vector<std::string> map_tags(std::span<const std::string> tags, std::span<const std::size_t> alignment) {
  std::vector<std::string> out(alignment.size(), "O");
  for (const Span& s : spans(tags)) {
    std::vector<std::size_t> pos;
    for (std::size_t j = 0; j < alignment.size(); ++j) {
      if (alignment[j] >= s.begin && alignment[j] < s.end) pos.push_back(j);
    }
    for (std::size_t k = 0; k < pos.size(); ++k) {
      bool begins = k == 0 || pos[k] != pos[k - 1] + 1;
      out[pos[k]] = (begins ? "B-" : "I-") + s.type;
    }
  }
  return out;
}

std::vector<std::string> project_tags(std::span<const std::string> tags, std::span<const std::size_t> alignment) {
  std::vector<std::string> out;
  out.reserve(alignment.size());
  for (std::size_t j : alignment) out.push_back(tags[j]);
  return repair(out);
}

Benchmark generate(const LanguageSet& languages, const SplitSizes& sizes, uint64_t seed) {
  for (std::string_view split : kSplits) {
    if (sizes.of(split) < 50) throw Error("generate: split " + std::string(split) + " needs at least 50 examples");
  }
  const Grammar& grammar = languages.grammar();
  Benchmark bench;
  for (const std::string& lang : languages.ids()) {
    const LanguageTransform& t = languages.language(lang);
    for (std::string_view split : kSplits) {
      Rng rng = make_rng(seed, "generate/" + lang + "/" + std::string(split));
      std::vector<Corpus::Entry> entries;
      for (std::size_t i = 0; i < sizes.of(split); ++i) {
        Sentence s = grammar.sample(rng);
        char num[16];
        std::snprintf(num, sizeof num, "%05zu", i);
        Example ex;
        ex.id = lang + "-" + std::string(split) + "-" + num;
        ex.lang = lang;
        ex.intent = s.intent;
        Translation tr = t.forward(s.words);
        ex.words = std::move(tr.words);
        ex.slots = map_tags(s.slots, tr.alignment);
        std::string origin = ex.id;
        entries.push_back({std::move(ex), std::move(origin), {}});
      }
      bench[lang][std::string(split)] =
          Corpus(lang + "/" + std::string(split), lang, std::move(entries), true, std::make_shared<LabelLedger>());
    }
  }
  return bench;
}

Corpus pretraining_corpus(const LanguageSet& languages, const std::string& lang, std::size_t size, uint64_t seed) {
  const LanguageTransform& t = languages.language(lang);
  Rng rng = make_rng(seed, "pretrain/" + lang);
  std::vector<Corpus::Entry> entries;
  for (std::size_t i = 0; i < size; ++i) {
    char num[16];
    std::snprintf(num, sizeof num, "%06zu", i);
    Example ex;
    ex.id = lang + "-pretrain-" + num;
    ex.lang = lang;
    ex.words = t.forward(languages.grammar().sample(rng).words).words;
    std::string origin = ex.id;
    entries.push_back({std::move(ex), std::move(origin), {}});
  }
  return Corpus(lang + "/pretrain", lang, std::move(entries), false, std::make_shared<LabelLedger>());
}

void write_benchmark(const Benchmark& bench, const std::filesystem::path& dir) {
  for (const auto& [lang, splits] : bench) {
    for (const auto& [split, corpus] : splits) write_jsonl(corpus, dir / lang / (split + ".jsonl"));
  }
}

Benchmark read_benchmark(const std::filesystem::path& dir) {
  Benchmark bench;
  if (!std::filesystem::is_directory(dir)) throw Error("no benchmark directory " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    std::string lang = entry.path().filename().string();
    for (std::string_view split : kSplits) {
      auto path = entry.path() / (std::string(split) + ".jsonl");
      if (std::filesystem::exists(path)) bench[lang][std::string(split)] = read_jsonl(path, lang + "/" + std::string(split));
    }
  }
  return bench;
}

Corpus translate(const LanguageSet& languages, const Corpus& corpus, const std::string& to) {
  if (!languages.has(corpus.lang())) throw Error("translate: no transform for language '" + corpus.lang() + "'");
  if (!languages.has(to)) throw Error("translate: no transform for language '" + to + "'");
  std::vector<Corpus::Entry> entries;
  entries.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Corpus::Entry& src = corpus.raw(i);
    Translation tr = languages.translate(src.example.words, corpus.lang(), to);
    Corpus::Entry e;
    e.example.id = src.example.id + "@" + to;
    e.example.lang = to;
    e.example.words = std::move(tr.words);
    if (corpus.labels_visible()) {
      e.example.intent = src.example.intent;
      if (src.example.slots) e.example.slots = map_tags(*src.example.slots, tr.alignment);
    }
    e.origin = src.example.id;
    e.alignment = std::move(tr.alignment);
    entries.push_back(std::move(e));
  }
  return Corpus(corpus.name() + "@" + to, to, std::move(entries), corpus.labels_visible(), corpus.shared_ledger());
}

Corpus paraphrase(const LanguageSet& languages, const Corpus& corpus, uint64_t seed) {
  const LanguageTransform& lang = languages.language(corpus.lang());
  const Grammar& grammar = languages.grammar();
  const std::vector<std::string>& fillers = grammar.fillers();
  std::vector<Corpus::Entry> entries;
  entries.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Example& src = corpus.raw(i).example;
    Rng rng = make_rng(seed, "paraphrase/" + src.id);
    Example ex = src;
    ex.id = src.id + "~p";
    if (!corpus.labels_visible()) {
      ex.intent.reset();
      ex.slots.reset();
    }
    auto chunks = lang.chunks(ex.words);
    bool eligible = false;
    for (auto [b, e] : chunks) {
      if (e - b != 1) continue;
      const std::vector<std::string>& syn = grammar.synonyms(lang.decode(ex.words[b]));
      if (syn.size() < 2) continue;
      eligible = true;
      if (uniform01(rng) >= 0.5) continue;
      std::size_t self = static_cast<std::size_t>(std::ranges::find(syn, lang.decode(ex.words[b])) - syn.begin());
      std::size_t pick = uniform_index(rng, syn.size() - 1);
      if (pick >= self) ++pick;
      ex.words[b] = lang.encode(syn[pick]);
    }
    if (eligible && !fillers.empty() && uniform01(rng) < 0.5) {
      std::size_t boundary = uniform_index(rng, chunks.size() + 1);
      std::size_t at = boundary == chunks.size() ? ex.words.size() : chunks[boundary].first;
      const std::string& w = lang.encode(fillers[uniform_index(rng, fillers.size())]);
      ex.words.insert(ex.words.begin() + static_cast<long>(at), w);
      if (ex.slots) ex.slots->insert(ex.slots->begin() + static_cast<long>(at), "O");
    }
    std::string origin = ex.id;
    entries.push_back({std::move(ex), std::move(origin), {}});
  }
  return Corpus(corpus.name() + "~p", corpus.lang(), std::move(entries), corpus.labels_visible(),
                corpus.shared_ledger());
}

}  // namespace xlkd::synthlang
