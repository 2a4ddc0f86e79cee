// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xlkd/common/seed.hpp"

namespace xlkd::synthlang {

using Phrase = std::vector<std::string>;

struct TemplateToken {
  enum class Kind { kLiteral, kGroup, kSlot };
  Kind kind = Kind::kLiteral;
  std::string text;  // word, group name or slot name
  bool optional = false;
};

struct Template {
  std::vector<std::string> intents;
  std::string pattern;
  std::vector<TemplateToken> tokens;
};

struct SlotType {
  std::string name;
  std::string lexicon;
};

// One lexicon entry: synonymous surface variants of the same value.
using LexiconEntry = std::vector<Phrase>;

struct Sentence {
  std::vector<std::string> words;
  std::string intent;
  std::vector<std::string> slots;
};

// Template grammar for the source language. Construct through from_json,
// which validates the whole document.
class Grammar {
 public:
  static Grammar from_json(const nlohmann::json& doc);
  static Grammar load(const std::string& path);

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<SlotType>& slot_types() const { return slots_; }
  const std::vector<Template>& templates() const { return templates_; }
  const std::map<std::string, std::vector<LexiconEntry>>& lexicons() const { return lexicons_; }
  const std::map<std::string, std::vector<std::string>>& groups() const { return groups_; }
  const std::vector<std::string>& function_words() const { return function_words_; }
  const std::vector<std::string>& fillers() const { return fillers_; }

  // "O" followed by B-/I- pairs in slot-type order.
  std::vector<std::string> slot_labels() const;
  // Every word the grammar can emit, sorted.
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  // Lexicon phrases of two or more words.
  const std::vector<Phrase>& multiword_phrases() const { return multiword_; }
  bool is_function_word(const std::string& w) const;
  // Single-word synonym class of a word (itself included), empty if none.
  const std::vector<std::string>& synonyms(const std::string& w) const;

  // Intent uniformly, template uniformly among the intent's templates,
  // group words and lexicon variants by rank-weighted draws.
  Sentence sample(Rng& rng) const;

 private:
  void index();

  std::vector<std::string> intents_;
  std::vector<SlotType> slots_;
  std::map<std::string, std::vector<LexiconEntry>> lexicons_;
  std::map<std::string, std::vector<std::string>> groups_;
  std::vector<std::string> function_words_;
  std::vector<std::string> fillers_;
  std::vector<Template> templates_;

  std::vector<std::vector<std::size_t>> by_intent_;
  std::vector<std::string> vocabulary_;
  std::vector<Phrase> multiword_;
  std::map<std::string, std::vector<std::string>> synonyms_;
};

}  // namespace xlkd::synthlang
