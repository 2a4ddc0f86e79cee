// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xlkd::synthlang {

struct Example {
  std::string id;
  std::string lang;
  std::vector<std::string> words;
  std::optional<std::string> intent;
  std::optional<std::vector<std::string>> slots;
};

// Counts label reads against one body of data, across all of its views.
struct LabelLedger {
  std::atomic<uint64_t> successful{0};
  std::atomic<uint64_t> denied{0};
};

// Immutable list of examples plus a label-visibility flag. Copies and views
// share the examples and the ledger.
class Corpus {
 public:
  struct Entry {
    Example example;
    // Id of the example this one was translated from (its own id otherwise).
    std::string origin;
    // Per output word: index of the aligned word in the origin example.
    std::vector<std::size_t> alignment;
  };

  Corpus() = default;
  Corpus(std::string name, std::string lang, std::vector<Example> examples);
  Corpus(std::string name, std::string lang, std::vector<Entry> entries, bool labels_visible,
         std::shared_ptr<LabelLedger> ledger);

  const std::string& name() const { return name_; }
  const std::string& lang() const { return lang_; }
  std::size_t size() const { return entries_ ? entries_->size() : 0; }
  bool empty() const { return size() == 0; }

  const std::string& id(std::size_t i) const { return entry(i).example.id; }
  std::span<const std::string> words(std::size_t i) const { return entry(i).example.words; }
  const std::string& origin(std::size_t i) const { return entry(i).origin; }
  std::span<const std::size_t> alignment(std::size_t i) const { return entry(i).alignment; }

  bool labels_visible() const { return visible_; }
  // Label reads. Through an unlabeled view they throw LabelAccessError;
  // every attempt is recorded in the ledger.
  const std::string& intent(std::size_t i) const;
  std::span<const std::string> slots(std::size_t i) const;

  Corpus unlabeled_view() const;
  // Examples [begin, end) with the same visibility and ledger.
  Corpus slice(std::size_t begin, std::size_t end) const;
  Corpus renamed(std::string name) const;

  const LabelLedger& ledger() const { return *ledger_; }
  std::shared_ptr<LabelLedger> shared_ledger() const { return ledger_; }

  // Ungated access for transforms that carry labels along (translation,
  // paraphrasing, serialization). Not counted.
  const Entry& raw(std::size_t i) const { return entry(i); }

 private:
  const Entry& entry(std::size_t i) const;
  void count(bool ok) const;

  std::string name_;
  std::string lang_;
  std::shared_ptr<const std::vector<Entry>> entries_;
  bool visible_ = true;
  std::shared_ptr<LabelLedger> ledger_ = std::make_shared<LabelLedger>();
};

// JSON lines: id, lang, words, intent?, slots?. Labels are written only
// when the corpus exposes them.
std::string to_jsonl(const Corpus& corpus);
void write_jsonl(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_jsonl(const std::filesystem::path& path, std::string name = {});
Corpus parse_jsonl(std::string_view text, std::string name);

}  // namespace xlkd::synthlang
