// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/synthlang/grammar.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"
#include "xlkd/synthlang/bio.hpp"

namespace xlkd::synthlang {
namespace {

using nlohmann::json;

Phrase split_words(const std::string& s) {
  Phrase out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<TemplateToken> parse_pattern(const std::string& pattern) {
  std::vector<TemplateToken> out;
  for (std::string w : split_words(pattern)) {
    TemplateToken t;
    if (w.size() > 1 && w.back() == '?') {
      t.optional = true;
      w.pop_back();
    }
    if (w.size() > 2 && w.front() == '{' && w.back() == '}') {
      t.kind = TemplateToken::Kind::kGroup;
      t.text = w.substr(1, w.size() - 2);
    } else if (w.size() > 1 && w.front() == '$') {
      t.kind = TemplateToken::Kind::kSlot;
      t.text = w.substr(1);
    } else {
      t.text = w;
    }
    out.push_back(std::move(t));
  }
  if (out.empty()) throw SchemaError("grammar: empty template pattern");
  return out;
}

// Rank-weighted draw: item r has weight 1/(r+1).
std::size_t rank_weighted(Rng& rng, std::size_t n) {
  double total = 0;
  for (std::size_t r = 0; r < n; ++r) total += 1.0 / static_cast<double>(r + 1);
  double u = uniform01(rng) * total;
  for (std::size_t r = 0; r < n; ++r) {
    u -= 1.0 / static_cast<double>(r + 1);
    if (u < 0) return r;
  }
  return n - 1;
}

}  // namespace

Grammar Grammar::from_json(const json& doc) {
  Grammar g;
  try {
    g.intents_ = doc.at("intents").get<std::vector<std::string>>();
    for (const json& s : doc.at("slots")) {
      g.slots_.push_back({s.at("name").get<std::string>(), s.at("lexicon").get<std::string>()});
    }
    for (const auto& [name, entries] : doc.at("lexicons").items()) {
      std::vector<LexiconEntry>& lex = g.lexicons_[name];
      for (const json& e : entries) {
        LexiconEntry entry;
        for (const json& v : e) entry.push_back(split_words(v.get<std::string>()));
        if (entry.empty() || std::ranges::any_of(entry, [](const Phrase& p) { return p.empty(); }))
          throw SchemaError("grammar: empty lexicon entry in '" + name + "'");
        lex.push_back(std::move(entry));
      }
    }
    g.groups_ = doc.at("groups").get<std::map<std::string, std::vector<std::string>>>();
    g.function_words_ = doc.at("function_words").get<std::vector<std::string>>();
    g.fillers_ = doc.value("fillers", std::vector<std::string>{});
    for (const json& t : doc.at("templates")) {
      Template tpl;
      tpl.intents = t.at("intents").get<std::vector<std::string>>();
      tpl.pattern = t.at("pattern").get<std::string>();
      tpl.tokens = parse_pattern(tpl.pattern);
      g.templates_.push_back(std::move(tpl));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("grammar: ") + e.what());
  }
  g.index();
  return g;
}

Grammar Grammar::load(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw SchemaError("grammar: " + path + ": " + e.what());
  }
  return from_json(doc);
}

void Grammar::index() {
  if (intents_.empty()) throw SchemaError("grammar: no intents");
  if (std::set<std::string>(intents_.begin(), intents_.end()).size() != intents_.size())
    throw SchemaError("grammar: duplicate intent");
  std::set<std::string> slot_names;
  for (const SlotType& s : slots_) {
    if (!slot_names.insert(s.name).second) throw SchemaError("grammar: duplicate slot type '" + s.name + "'");
    auto it = lexicons_.find(s.lexicon);
    if (it == lexicons_.end())
      throw SchemaError("grammar: slot '" + s.name + "' uses unknown lexicon '" + s.lexicon + "'");
    if (it->second.size() < 4)
      throw SchemaError("grammar: slot '" + s.name + "' has fewer than 4 lexicon entries");
  }
  for (const auto& [name, words] : groups_) {
    if (words.empty()) throw SchemaError("grammar: empty group '" + name + "'");
  }

  by_intent_.assign(intents_.size(), {});
  for (std::size_t t = 0; t < templates_.size(); ++t) {
    const Template& tpl = templates_[t];
    if (tpl.intents.empty()) throw SchemaError("grammar: template without intent: " + tpl.pattern);
    for (const std::string& intent : tpl.intents) {
      auto it = std::ranges::find(intents_, intent);
      if (it == intents_.end())
        throw SchemaError("grammar: unknown intent '" + intent + "' in template: " + tpl.pattern);
      by_intent_[static_cast<std::size_t>(it - intents_.begin())].push_back(t);
    }
    for (const TemplateToken& tok : tpl.tokens) {
      if (tok.kind == TemplateToken::Kind::kGroup && !groups_.contains(tok.text))
        throw SchemaError("grammar: unknown group '" + tok.text + "' in template: " + tpl.pattern);
      if (tok.kind == TemplateToken::Kind::kSlot && !slot_names.contains(tok.text))
        throw SchemaError("grammar: unknown slot '" + tok.text + "' in template: " + tpl.pattern);
    }
  }
  for (std::size_t i = 0; i < intents_.size(); ++i) {
    if (by_intent_[i].size() < 2)
      throw SchemaError("grammar: intent '" + intents_[i] + "' has fewer than 2 templates");
  }

  std::set<std::string> vocab(function_words_.begin(), function_words_.end());
  vocab.insert(fillers_.begin(), fillers_.end());
  for (const Template& tpl : templates_) {
    for (const TemplateToken& tok : tpl.tokens) {
      if (tok.kind == TemplateToken::Kind::kLiteral) vocab.insert(tok.text);
    }
  }
  std::set<Phrase> multi;
  synonyms_.clear();
  auto add_class = [&](const std::vector<std::string>& members) {
    if (members.size() < 2) return;
    for (const std::string& w : members) {
      if (synonyms_.contains(w)) throw SchemaError("grammar: word '" + w + "' is in two synonym groups");
      synonyms_[w] = members;
    }
  };
  for (const auto& [name, words] : groups_) {
    vocab.insert(words.begin(), words.end());
    add_class(words);
  }
  for (const auto& [name, entries] : lexicons_) {
    for (const LexiconEntry& entry : entries) {
      std::vector<std::string> singles;
      for (const Phrase& p : entry) {
        vocab.insert(p.begin(), p.end());
        if (p.size() > 1) multi.insert(p);
        else singles.push_back(p[0]);
      }
      add_class(singles);
    }
  }
  for (const std::string& w : fillers_) {
    if (!is_function_word(w)) throw SchemaError("grammar: filler '" + w + "' is not a function word");
  }
  vocabulary_.assign(vocab.begin(), vocab.end());
  multiword_.assign(multi.begin(), multi.end());
}

std::vector<std::string> Grammar::slot_labels() const {
  std::vector<std::string> out{"O"};
  for (const SlotType& s : slots_) {
    out.push_back("B-" + s.name);
    out.push_back("I-" + s.name);
  }
  return out;
}

bool Grammar::is_function_word(const std::string& w) const {
  return std::ranges::find(function_words_, w) != function_words_.end();
}

const std::vector<std::string>& Grammar::synonyms(const std::string& w) const {
  static const std::vector<std::string> kNone;
  auto it = synonyms_.find(w);
  return it == synonyms_.end() ? kNone : it->second;
}

Sentence Grammar::sample(Rng& rng) const {
  Sentence s;
  std::size_t intent = uniform_index(rng, intents_.size());
  const std::vector<std::size_t>& pool = by_intent_[intent];
  const Template& tpl = templates_[pool[uniform_index(rng, pool.size())]];
  s.intent = intents_[intent];
  for (const TemplateToken& tok : tpl.tokens) {
    if (tok.optional && uniform01(rng) < 0.5) continue;
    switch (tok.kind) {
      case TemplateToken::Kind::kLiteral:
        s.words.push_back(tok.text);
        s.slots.emplace_back("O");
        break;
      case TemplateToken::Kind::kGroup: {
        const std::vector<std::string>& words = groups_.at(tok.text);
        s.words.push_back(words[rank_weighted(rng, words.size())]);
        s.slots.emplace_back("O");
        break;
      }
      case TemplateToken::Kind::kSlot: {
        const SlotType& st = *std::ranges::find(slots_, tok.text, &SlotType::name);
        const std::vector<LexiconEntry>& lex = lexicons_.at(st.lexicon);
        const LexiconEntry& entry = lex[uniform_index(rng, lex.size())];
        const Phrase& p = entry[rank_weighted(rng, entry.size())];
        for (std::size_t i = 0; i < p.size(); ++i) {
          s.words.push_back(p[i]);
          s.slots.push_back((i == 0 ? "B-" : "I-") + st.name);
        }
        break;
      }
    }
  }
  return s;
}

}  // namespace xlkd::synthlang
