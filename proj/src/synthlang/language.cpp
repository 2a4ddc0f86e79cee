// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/synthlang/language.hpp"

#include <algorithm>
#include <array>
#include <set>

#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"

namespace xlkd::synthlang {

std::vector<std::size_t> ReorderRule::permutation(std::size_t n) const {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  if (n < 2) return out;
  switch (order) {
    case Order::kKeep:
      break;
    case Order::kReverse:
      std::ranges::reverse(out);
      break;
    case Order::kRotate: {
      auto k = static_cast<std::size_t>(((rotate % static_cast<long>(n)) + static_cast<long>(n)) %
                                        static_cast<long>(n));
      for (std::size_t i = 0; i < n; ++i) out[(i + k) % n] = i;
      break;
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> chunk(std::span<const std::string> words,
                                                       std::span<const Phrase> phrases) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < words.size()) {
    std::size_t best = 1;
    for (const Phrase& p : phrases) {
      if (p.size() <= best || i + p.size() > words.size()) continue;
      if (std::equal(p.begin(), p.end(), words.begin() + static_cast<long>(i))) best = p.size();
    }
    out.emplace_back(i, i + best);
    i += best;
  }
  return out;
}

LanguageTransform LanguageTransform::identity(std::string id, std::vector<Phrase> phrases) {
  LanguageTransform t;
  t.id_ = std::move(id);
  t.identity_ = true;
  t.source_phrases_ = phrases;
  t.target_phrases_ = std::move(phrases);
  return t;
}

LanguageTransform LanguageTransform::from_cipher(std::string id, std::map<std::string, std::string> cipher,
                                                 ReorderRule rule, std::vector<Phrase> phrases) {
  LanguageTransform t;
  t.id_ = std::move(id);
  t.rule_ = rule;
  for (auto& [src, tgt] : cipher) {
    auto [it, fresh] = t.inv_.emplace(tgt, src);
    if (!fresh)
      throw SchemaError("language " + t.id_ + ": cipher maps '" + it->second + "' and '" + src + "' to '" +
                        tgt + "'");
    t.fwd_.emplace(src, tgt);
  }
  for (Phrase& p : phrases) {
    if (!std::ranges::all_of(p, [&](const std::string& w) { return t.fwd_.contains(w); })) continue;
    Phrase tp;
    for (const std::string& w : p) tp.push_back(t.fwd_.at(w));
    if (rule.reverse_phrases) std::ranges::reverse(tp);
    t.source_phrases_.push_back(std::move(p));
    t.target_phrases_.push_back(std::move(tp));
  }
  return t;
}

LanguageTransform LanguageTransform::from_rules(std::string id, const Grammar& grammar,
                                                const std::vector<std::pair<char, char>>& char_swaps,
                                                const std::string& suffix, ReorderRule rule,
                                                const std::vector<std::string>& keep_lexicons) {
  std::set<std::string> kept;
  for (const std::string& name : keep_lexicons) {
    auto it = grammar.lexicons().find(name);
    if (it == grammar.lexicons().end()) throw SchemaError("language " + id + ": unknown lexicon '" + name + "'");
    for (const LexiconEntry& entry : it->second)
      for (const Phrase& phrase : entry) kept.insert(phrase.begin(), phrase.end());
  }
  std::array<char, 256> table{};
  for (int c = 0; c < 256; ++c) table[static_cast<std::size_t>(c)] = static_cast<char>(c);
  for (auto [a, b] : char_swaps) {
    auto ia = static_cast<unsigned char>(a), ib = static_cast<unsigned char>(b);
    if (table[ia] != a || table[ib] != b)
      throw SchemaError("language " + id + ": character swaps overlap on '" + std::string(1, a) + "'");
    table[ia] = b;
    table[ib] = a;
  }
  std::map<std::string, std::string> cipher;
  for (const std::string& w : grammar.vocabulary()) {
    std::string t = w;
    if (!kept.contains(w)) {
      for (char& c : t) c = table[static_cast<unsigned char>(c)];
      if (!grammar.is_function_word(w)) t += suffix;
    }
    cipher.emplace(w, std::move(t));
  }
  return from_cipher(std::move(id), std::move(cipher), rule, grammar.multiword_phrases());
}

const std::string& LanguageTransform::encode(const std::string& w) const {
  if (identity_) return w;
  auto it = fwd_.find(w);
  if (it == fwd_.end()) throw Error("translate: out-of-vocabulary word '" + w + "' for language " + id_);
  return it->second;
}

const std::string& LanguageTransform::decode(const std::string& w) const {
  if (identity_) return w;
  auto it = inv_.find(w);
  if (it == inv_.end()) throw Error("translate: out-of-vocabulary word '" + w + "' in language " + id_);
  return it->second;
}

bool LanguageTransform::knows(const std::string& w) const { return identity_ || inv_.contains(w); }

std::vector<std::pair<std::size_t, std::size_t>> LanguageTransform::chunks(
    std::span<const std::string> words) const {
  return chunk(words, target_phrases_);
}

Translation LanguageTransform::forward(std::span<const std::string> words) const {
  Translation out;
  auto chunks = chunk(words, source_phrases_);
  for (std::size_t c : rule_.permutation(chunks.size())) {
    auto [b, e] = chunks[c];
    for (std::size_t k = 0; k < e - b; ++k) {
      std::size_t i = rule_.reverse_phrases ? e - 1 - k : b + k;
      out.words.push_back(encode(words[i]));
      out.alignment.push_back(i);
    }
  }
  return out;
}

Translation LanguageTransform::inverse(std::span<const std::string> words) const {
  Translation out;
  auto chunks = chunk(words, target_phrases_);
  std::vector<std::size_t> perm = rule_.permutation(chunks.size());
  std::vector<std::size_t> where(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) where[perm[j]] = j;
  for (std::size_t s = 0; s < where.size(); ++s) {
    auto [b, e] = chunks[where[s]];
    for (std::size_t k = 0; k < e - b; ++k) {
      std::size_t i = rule_.reverse_phrases ? e - 1 - k : b + k;
      out.words.push_back(decode(words[i]));
      out.alignment.push_back(i);
    }
  }
  return out;
}

LanguageTransform LanguageTransform::without_reorder() const {
  LanguageTransform t = *this;
  if (rule_.reverse_phrases) {
    for (Phrase& p : t.target_phrases_) std::ranges::reverse(p);
  }
  t.rule_ = ReorderRule{};
  return t;
}

namespace {

ReorderRule parse_rule(const nlohmann::json& j) {
  ReorderRule r;
  std::string order = j.value("chunks", std::string("keep"));
  if (order == "keep") r.order = ReorderRule::Order::kKeep;
  else if (order == "reverse") r.order = ReorderRule::Order::kReverse;
  else if (order == "rotate") r.order = ReorderRule::Order::kRotate;
  else throw SchemaError("language: unknown chunk order '" + order + "'");
  r.rotate = j.value("rotate", 0);
  r.reverse_phrases = j.value("reverse_phrases", false);
  return r;
}

}  // namespace

LanguageSet LanguageSet::from_json(const nlohmann::json& doc) {
  Grammar grammar = Grammar::from_json(doc);
  std::vector<LanguageTransform> langs;
  try {
    for (const nlohmann::json& l : doc.at("languages")) {
      std::string id = l.at("id").get<std::string>();
      if (l.value("source", false)) {
        langs.push_back(LanguageTransform::identity(id, grammar.multiword_phrases()));
        continue;
      }
      std::vector<std::pair<char, char>> swaps;
      for (const auto& s : l.value("char_swaps", nlohmann::json::array())) {
        auto a = s.at(0).get<std::string>(), b = s.at(1).get<std::string>();
        if (a.size() != 1 || b.size() != 1) throw SchemaError("language " + id + ": swaps take single characters");
        swaps.emplace_back(a[0], b[0]);
      }
      langs.push_back(LanguageTransform::from_rules(id, grammar, swaps, l.value("suffix", std::string()),
                                                    parse_rule(l.value("reorder", nlohmann::json::object())),
                                                    l.value("keep_lexicons", std::vector<std::string>{})));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("languages: ") + e.what());
  }
  return LanguageSet(std::move(grammar), std::move(langs));
}

LanguageSet LanguageSet::load(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("languages: " + path + ": " + e.what());
  }
  return from_json(doc);
}

LanguageSet::LanguageSet(Grammar grammar, std::vector<LanguageTransform> languages)
    : grammar_(std::make_shared<const Grammar>(std::move(grammar))), languages_(std::move(languages)) {
  if (std::ranges::count_if(languages_, &LanguageTransform::is_identity) != 1)
    throw SchemaError("languages: exactly one source language required");
  for (std::size_t i = 0; i < languages_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (languages_[i].id() == languages_[j].id())
        throw SchemaError("languages: duplicate id '" + languages_[i].id() + "'");
    }
  }
}

const std::string& LanguageSet::source() const {
  return std::ranges::find_if(languages_, &LanguageTransform::is_identity)->id();
}

std::vector<std::string> LanguageSet::targets() const {
  std::vector<std::string> out;
  for (const LanguageTransform& l : languages_) {
    if (!l.is_identity()) out.push_back(l.id());
  }
  return out;
}

std::vector<std::string> LanguageSet::ids() const {
  std::vector<std::string> out;
  for (const LanguageTransform& l : languages_) out.push_back(l.id());
  return out;
}

bool LanguageSet::has(const std::string& id) const {
  return std::ranges::any_of(languages_, [&](const LanguageTransform& l) { return l.id() == id; });
}

const LanguageTransform& LanguageSet::language(const std::string& id) const {
  for (const LanguageTransform& l : languages_) {
    if (l.id() == id) return l;
  }
  throw Error("no transform registered for language '" + id + "'");
}

Translation LanguageSet::translate(std::span<const std::string> words, const std::string& from,
                                   const std::string& to) const {
  const LanguageTransform& a = language(from);
  const LanguageTransform& b = language(to);
  Translation pivot = a.inverse(words);
  Translation out = b.forward(pivot.words);
  for (std::size_t& j : out.alignment) j = pivot.alignment[j];
  return out;
}

LanguageSet LanguageSet::without_reorder() const {
  LanguageSet copy = *this;
  for (LanguageTransform& l : copy.languages_) l = l.without_reorder();
  return copy;
}

}  // namespace xlkd::synthlang
