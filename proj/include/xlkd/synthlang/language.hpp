// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xlkd/synthlang/grammar.hpp"

namespace xlkd::synthlang {

// Word order is rewritten at the level of chunks: multi-word lexicon phrases
// are one chunk, every other word is its own chunk. The rule only looks at
// positions, so it can be undone from the words alone.
struct ReorderRule {
  enum class Order { kKeep, kReverse, kRotate };
  Order order = Order::kKeep;
  int rotate = 0;  // kRotate: chunk i moves to (i + rotate) mod n
  bool reverse_phrases = false;

  bool trivial() const { return order == Order::kKeep && !reverse_phrases; }
  // out[j] = index of the source chunk placed at position j.
  std::vector<std::size_t> permutation(std::size_t n) const;
};

struct Translation {
  std::vector<std::string> words;
  // alignment[j] = source word index of output word j.
  std::vector<std::size_t> alignment;
};

class LanguageTransform {
 public:
  // The source language itself.
  static LanguageTransform identity(std::string id, std::vector<Phrase> phrases = {});
  // Explicit word cipher; must be a bijection.
  static LanguageTransform from_cipher(std::string id, std::map<std::string, std::string> cipher,
                                       ReorderRule rule, std::vector<Phrase> phrases = {});
  // Cipher derived from the grammar: letter swaps on every word plus a suffix
  // on content words. Rejects rules that would merge two words.
  static LanguageTransform from_rules(std::string id, const Grammar& grammar,
                                      const std::vector<std::pair<char, char>>& char_swaps,
                                      const std::string& suffix, ReorderRule rule,
                                      const std::vector<std::string>& keep_lexicons = {});

  const std::string& id() const { return id_; }
  bool is_identity() const { return identity_; }
  const ReorderRule& rule() const { return rule_; }

  // Source language -> this language.
  Translation forward(std::span<const std::string> words) const;
  // This language -> source language.
  Translation inverse(std::span<const std::string> words) const;

  const std::string& encode(const std::string& source_word) const;
  const std::string& decode(const std::string& word) const;
  bool knows(const std::string& word) const;
  // Chunks of a sentence written in this language.
  std::vector<std::pair<std::size_t, std::size_t>> chunks(std::span<const std::string> words) const;

  // Copy with word order left untouched.
  LanguageTransform without_reorder() const;

 private:
  std::string id_;
  bool identity_ = false;
  std::unordered_map<std::string, std::string> fwd_;
  std::unordered_map<std::string, std::string> inv_;
  ReorderRule rule_;
  std::vector<Phrase> source_phrases_;
  std::vector<Phrase> target_phrases_;
};

// Greedy longest-match chunking: returns [begin, end) word ranges.
std::vector<std::pair<std::size_t, std::size_t>> chunk(std::span<const std::string> words,
                                                       std::span<const Phrase> phrases);

// A source grammar plus its registered languages.
class LanguageSet {
 public:
  // Grammar document with a "languages" array.
  static LanguageSet from_json(const nlohmann::json& doc);
  static LanguageSet load(const std::string& path);
  LanguageSet(Grammar grammar, std::vector<LanguageTransform> languages);

  const Grammar& grammar() const { return *grammar_; }
  const std::string& source() const;
  std::vector<std::string> targets() const;
  std::vector<std::string> ids() const;
  const LanguageTransform& language(const std::string& id) const;
  bool has(const std::string& id) const;

  Translation translate(std::span<const std::string> words, const std::string& from,
                        const std::string& to) const;

  // Same languages with every reorder rule disabled.
  LanguageSet without_reorder() const;

 private:
  std::shared_ptr<const Grammar> grammar_;
  std::vector<LanguageTransform> languages_;
};

}  // namespace xlkd::synthlang
