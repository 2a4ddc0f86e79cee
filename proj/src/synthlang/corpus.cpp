// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/synthlang/corpus.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"

namespace xlkd::synthlang {

Corpus::Corpus(std::string name, std::string lang, std::vector<Example> examples)
    : name_(std::move(name)), lang_(std::move(lang)) {
  std::vector<Entry> entries;
  entries.reserve(examples.size());
  for (Example& ex : examples) {
    if (ex.slots && ex.slots->size() != ex.words.size())
      throw SchemaError("example " + ex.id + ": " + std::to_string(ex.slots->size()) + " slot tags for " +
                        std::to_string(ex.words.size()) + " words");
    std::string origin = ex.id;
    entries.push_back({std::move(ex), std::move(origin), {}});
  }
  entries_ = std::make_shared<const std::vector<Entry>>(std::move(entries));
}

Corpus::Corpus(std::string name, std::string lang, std::vector<Entry> entries, bool labels_visible,
               std::shared_ptr<LabelLedger> ledger)
    : name_(std::move(name)),
      lang_(std::move(lang)),
      entries_(std::make_shared<const std::vector<Entry>>(std::move(entries))),
      visible_(labels_visible),
      ledger_(std::move(ledger)) {
  for (const Entry& e : *entries_) {
    if (e.example.slots && e.example.slots->size() != e.example.words.size())
      throw SchemaError("example " + e.example.id + ": slot tags and words differ in length");
  }
}

const Corpus::Entry& Corpus::entry(std::size_t i) const {
  if (i >= size()) throw Error("corpus " + name_ + ": index " + std::to_string(i) + " out of range");
  return (*entries_)[i];
}

void Corpus::count(bool ok) const {
  (ok ? ledger_->successful : ledger_->denied).fetch_add(1, std::memory_order_relaxed);
}

const std::string& Corpus::intent(std::size_t i) const {
  const Entry& e = entry(i);
  count(visible_);
  if (!visible_) throw LabelAccessError();
  if (!e.example.intent) throw Error("example " + e.example.id + " has no intent label");
  return *e.example.intent;
}

std::span<const std::string> Corpus::slots(std::size_t i) const {
  const Entry& e = entry(i);
  count(visible_);
  if (!visible_) throw LabelAccessError();
  if (!e.example.slots) throw Error("example " + e.example.id + " has no slot labels");
  return *e.example.slots;
}

Corpus Corpus::unlabeled_view() const {
  Corpus v = *this;
  v.visible_ = false;
  return v;
}

Corpus Corpus::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw Error("corpus " + name_ + ": bad slice");
  std::vector<Entry> part(entries_->begin() + static_cast<long>(begin), entries_->begin() + static_cast<long>(end));
  return Corpus(name_, lang_, std::move(part), visible_, ledger_);
}

Corpus Corpus::renamed(std::string name) const {
  Corpus c = *this;
  c.name_ = std::move(name);
  return c;
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Example& ex = corpus.raw(i).example;
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["lang"] = ex.lang;
    j["words"] = ex.words;
    if (corpus.labels_visible() && ex.intent) j["intent"] = *ex.intent;
    if (corpus.labels_visible() && ex.slots) j["slots"] = *ex.slots;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, to_jsonl(corpus));
}

Corpus parse_jsonl(std::string_view text, std::string name) {
  std::vector<Example> examples;
  std::string lang;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Example ex;
      ex.id = j.at("id").get<std::string>();
      ex.lang = j.at("lang").get<std::string>();
      ex.words = j.at("words").get<std::vector<std::string>>();
      if (j.contains("intent")) ex.intent = j["intent"].get<std::string>();
      if (j.contains("slots")) ex.slots = j["slots"].get<std::vector<std::string>>();
      if (lang.empty()) lang = ex.lang;
      if (ex.lang != lang) throw SchemaError("mixed languages " + lang + " and " + ex.lang);
      examples.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(name + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(name), std::move(lang), std::move(examples));
}

Corpus read_jsonl(const std::filesystem::path& path, std::string name) {
  if (name.empty()) name = path.stem().string();
  return parse_jsonl(read_file(path), std::move(name));
}

}  // namespace xlkd::synthlang
