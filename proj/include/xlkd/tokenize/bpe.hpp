// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xlkd/synthlang/corpus.hpp"

namespace xlkd::tokenize {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kMask = 3;
inline constexpr int kNumSpecials = 4;

struct Tokenization {
  std::vector<int> ids;
  // [begin, end) positions in ids for each word.
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
  std::vector<std::size_t> first_subword;
  bool bos = false;

  std::size_t num_words() const { return word_spans.size(); }
};

// Word-internal byte-pair vocabulary. Ids: the four specials, then the
// characters in byte order, then one token per merge in merge order.
class SubwordVocab {
 public:
  using Merge = std::pair<std::string, std::string>;

  // Merges the most frequent adjacent pair (ties: lexicographically smallest
  // merged token) until the non-special size reaches target_size or no pair
  // occurs at least twice. The character inventory is the characters of the
  // training words plus `base_alphabet`, so held-out words over a known
  // alphabet never hit the unknown token.
  static SubwordVocab train(std::span<const std::string> word_occurrences, std::size_t target_size,
                            std::string scope, std::span<const std::string> base_alphabet = {});
  static SubwordVocab train(std::span<const synthlang::Corpus> corpora, std::size_t target_size,
                            std::string scope, std::span<const std::string> base_alphabet = {});

  static SubwordVocab from_json(const nlohmann::json& doc);
  static SubwordVocab load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
  // SHA-256 of the serialized vocab.
  std::string hash() const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<Merge>& merges() const { return merges_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::string& scope() const { return scope_; }
  const std::string& token(int id) const;
  int id(const std::string& token) const;  // kUnk when absent

  std::vector<std::string> split(const std::string& word) const;
  Tokenization encode(std::span<const std::string> words, bool bos = false) const;
  std::vector<std::string> decode(const Tokenization& tok) const;

 private:
  void build();

  std::string scope_;
  std::vector<std::string> alphabet_;
  std::vector<Merge> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::map<Merge, std::size_t> rank_;
};

// Every example of `corpus`, with the sentence-start token.
std::vector<Tokenization> encode_corpus(const SubwordVocab& vocab, const synthlang::Corpus& corpus);

// One (teacher, student) pair of first-subword positions per word.
std::vector<std::pair<std::size_t, std::size_t>> align_first_subwords(const Tokenization& teacher,
                                                                      const Tokenization& student);

}  // namespace xlkd::tokenize
