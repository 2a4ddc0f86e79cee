// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/tokenize/bpe.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"

namespace xlkd::tokenize {
namespace {

const std::vector<std::string> kSpecialTokens = {"<pad>", "<unk>", "<s>", "<mask>"};

std::vector<std::string> chars_of(const std::string& w) {
  std::vector<std::string> out;
  for (char c : w) out.emplace_back(1, c);
  return out;
}

}  // namespace

SubwordVocab SubwordVocab::train(std::span<const std::string> word_occurrences, std::size_t target_size,
                                 std::string scope, std::span<const std::string> base_alphabet) {
  if (word_occurrences.empty()) throw Error("train_bpe: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const std::string& w : word_occurrences) ++freq[w];
  std::set<std::string> chars;
  for (const std::string& c : base_alphabet) {
    if (c.size() != 1) throw Error("train_bpe: alphabet entries must be single characters");
    chars.insert(c);
  }
  for (const auto& [w, n] : freq) {
    for (char c : w) chars.emplace(1, c);
  }
  if (target_size < chars.size())
    throw Error("train_bpe: target size " + std::to_string(target_size) + " below character inventory " +
                std::to_string(chars.size()));

  SubwordVocab v;
  v.scope_ = std::move(scope);
  v.alphabet_.assign(chars.begin(), chars.end());
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [w, n] : freq) words.emplace_back(chars_of(w), n);

  std::set<std::string> known(chars.begin(), chars.end());
  while (known.size() < target_size) {
    std::map<Merge, std::size_t> counts;
    for (const auto& [pieces, n] : words) {
      for (std::size_t i = 0; i + 1 < pieces.size(); ++i) counts[{pieces[i], pieces[i + 1]}] += n;
    }
    const Merge* best = nullptr;
    std::size_t best_count = 0;
    std::string best_token;
    for (const auto& [pair, n] : counts) {
      std::string merged = pair.first + pair.second;
      if (n > best_count || (n == best_count && merged < best_token)) {
        best = &pair;
        best_count = n;
        best_token = std::move(merged);
      }
    }
    if (!best || best_count < 2) break;
    Merge m = *best;
    v.merges_.push_back(m);
    for (auto& [pieces, n] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (i + 1 < pieces.size() && pieces[i] == m.first && pieces[i + 1] == m.second) {
          next.push_back(best_token);
          ++i;
        } else {
          next.push_back(pieces[i]);
        }
      }
      pieces = std::move(next);
    }
    known.insert(best_token);
  }
  v.build();
  return v;
}

SubwordVocab SubwordVocab::train(std::span<const synthlang::Corpus> corpora, std::size_t target_size,
                                 std::string scope, std::span<const std::string> base_alphabet) {
  std::vector<std::string> words;
  for (const synthlang::Corpus& c : corpora) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      auto ws = c.words(i);
      words.insert(words.end(), ws.begin(), ws.end());
    }
  }
  return train(words, target_size, std::move(scope), base_alphabet);
}

void SubwordVocab::build() {
  tokens_ = kSpecialTokens;
  tokens_.insert(tokens_.end(), alphabet_.begin(), alphabet_.end());
  rank_.clear();
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    rank_.emplace(merges_[r], r);
    std::string merged = merges_[r].first + merges_[r].second;
    // A merged string can arise from two different pairs; it gets one id.
    if (std::find(tokens_.begin(), tokens_.end(), merged) == tokens_.end()) tokens_.push_back(merged);
  }
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

const std::string& SubwordVocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw Error("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int SubwordVocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::string> SubwordVocab::split(const std::string& word) const {
  std::vector<std::string> pieces = chars_of(word);
  while (pieces.size() > 1) {
    std::size_t best_rank = merges_.size(), at = 0;
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
      auto it = rank_.find({pieces[i], pieces[i + 1]});
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        at = i;
      }
    }
    if (best_rank == merges_.size()) break;
    const Merge& m = merges_[best_rank];
    std::vector<std::string> next(pieces.begin(), pieces.begin() + static_cast<long>(at));
    for (std::size_t i = at; i < pieces.size(); ++i) {
      if (i + 1 < pieces.size() && pieces[i] == m.first && pieces[i + 1] == m.second) {
        next.push_back(m.first + m.second);
        ++i;
      } else {
        next.push_back(pieces[i]);
      }
    }
    pieces = std::move(next);
  }
  return pieces;
}

Tokenization SubwordVocab::encode(std::span<const std::string> words, bool bos) const {
  Tokenization t;
  t.bos = bos;
  if (bos) t.ids.push_back(kBos);
  for (const std::string& w : words) {
    std::size_t begin = t.ids.size();
    if (w.empty()) {
      t.ids.push_back(kUnk);
    } else {
      for (const std::string& piece : split(w)) t.ids.push_back(id(piece));
    }
    t.word_spans.emplace_back(begin, t.ids.size());
    t.first_subword.push_back(begin);
  }
  return t;
}

std::vector<std::string> SubwordVocab::decode(const Tokenization& tok) const {
  std::vector<std::string> out;
  for (auto [b, e] : tok.word_spans) {
    std::string w;
    for (std::size_t i = b; i < e; ++i) w += token(tok.ids[i]);
    out.push_back(std::move(w));
  }
  return out;
}

nlohmann::json SubwordVocab::to_json() const {
  nlohmann::ordered_json j;
  j["scope"] = scope_;
  j["specials"] = kSpecialTokens;
  j["alphabet"] = alphabet_;
  j["merges"] = nlohmann::json::array();
  for (const Merge& m : merges_) j["merges"].push_back({m.first, m.second});
  return nlohmann::json::parse(j.dump());
}

SubwordVocab SubwordVocab::from_json(const nlohmann::json& doc) {
  SubwordVocab v;
  try {
    v.scope_ = doc.at("scope").get<std::string>();
    if (doc.at("specials").get<std::vector<std::string>>() != kSpecialTokens)
      throw SchemaError("vocab: unexpected special tokens");
    v.alphabet_ = doc.at("alphabet").get<std::vector<std::string>>();
    for (const auto& m : doc.at("merges")) {
      if (m.size() != 2) throw SchemaError("vocab: merge must have two parts");
      v.merges_.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("vocab: ") + e.what());
  }
  v.build();
  return v;
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("vocab: " + path.string() + ": " + e.what());
  }
}

void SubwordVocab::save(const std::filesystem::path& path) const { write_file(path, to_json().dump(1) + "\n"); }

std::string SubwordVocab::hash() const { return sha256_hex(to_json().dump()); }

std::vector<std::pair<std::size_t, std::size_t>> align_first_subwords(const Tokenization& teacher,
                                                                      const Tokenization& student) {
  if (teacher.num_words() != student.num_words())
    throw Error("align_first_subwords: teacher has " + std::to_string(teacher.num_words()) +
                " words, student has " + std::to_string(student.num_words()));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < teacher.num_words(); ++i)
    out.emplace_back(teacher.first_subword[i], student.first_subword[i]);
  return out;
}

std::vector<Tokenization> encode_corpus(const SubwordVocab& vocab, const synthlang::Corpus& corpus) {
  std::vector<Tokenization> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) out.push_back(vocab.encode(corpus.words(i), true));
  return out;
}

}  // namespace xlkd::tokenize
