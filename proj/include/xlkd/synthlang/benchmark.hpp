// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlkd/synthlang/corpus.hpp"
#include "xlkd/synthlang/language.hpp"

namespace xlkd::synthlang {

inline constexpr std::array<std::string_view, 4> kSplits = {"annotated_train", "unannotated_train",
                                                            "validation", "test"};

struct SplitSizes {
  std::size_t annotated_train = 500;
  std::size_t unannotated_train = 500;
  std::size_t validation = 100;
  std::size_t test = 200;

  // Train pool divided into two halves that differ by at most one.
  static SplitSizes balanced(std::size_t train, std::size_t validation, std::size_t test);
  std::size_t of(std::string_view split) const;
};

// language -> split -> corpus. Every split carries gold labels; callers
// hand out unlabeled views where labels must stay hidden.
using Benchmark = std::map<std::string, std::map<std::string, Corpus>>;

Benchmark generate(const LanguageSet& languages, const SplitSizes& sizes, uint64_t seed);
// Unlabeled monolingual text for pivot pretraining, drawn independently of
// the task splits.
Corpus pretraining_corpus(const LanguageSet& languages, const std::string& lang, std::size_t size, uint64_t seed);

void write_benchmark(const Benchmark& bench, const std::filesystem::path& dir);
// Reads <dir>/<lang>/<split>.jsonl for every language and split present.
Benchmark read_benchmark(const std::filesystem::path& dir);

// Corpus in language `to`. Labels follow the words when the input exposes
// them; otherwise the result is an unlabeled view. The ledger is shared with
// the input.
Corpus translate(const LanguageSet& languages, const Corpus& corpus, const std::string& to);

// Swaps single-word content words within their synonym class with
// probability 0.5 each; an example that had at least one eligible word
// additionally gets one filler word at a chunk boundary with probability 0.5.
Corpus paraphrase(const LanguageSet& languages, const Corpus& corpus, uint64_t seed);

// Gold mapping: every source span is re-tagged so its first output word
// carries B-.
std::vector<std::string> map_tags(std::span<const std::string> tags, std::span<const std::size_t> alignment);
// Word-by-word copy followed by BIO repair, as a system that only sees
// word alignments would do it.
std::vector<std::string> project_tags(std::span<const std::string> tags, std::span<const std::size_t> alignment);

}  // namespace xlkd::synthlang
