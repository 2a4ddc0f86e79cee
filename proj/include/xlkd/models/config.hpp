// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xlkd::models {

enum class Family { kTransformer, kBiLstm, kCnn };
enum class Task { kSentence, kWord };
enum class HeadType { kSentence, kWord, kBoth };
enum class SizeClass { kEdge, kPivot };

std::string to_string(Family f);
std::string to_string(Task t);
Family parse_family(const std::string& s);
Task parse_task(const std::string& s);
inline constexpr Family kFamilies[] = {Family::kTransformer, Family::kBiLstm, Family::kCnn};

struct ArchConfig {
  Family family = Family::kTransformer;
  std::size_t embed = 64;
  // Transformer: model width. BiLSTM: both directions together. CNN: channels
  // per kernel branch (sentence) or per dilated layer (word).
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_mult = 4;
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  HeadType head = HeadType::kSentence;
  std::vector<std::string> sentence_labels;
  std::vector<std::string> word_labels;
  double dropout = 0.1;
  SizeClass size = SizeClass::kEdge;
  std::vector<std::size_t> kernels{3, 4, 5};
  std::vector<std::size_t> dilations{1, 2};
  // Masked-token output layer tied to the input embedding.
  bool mlm = false;

  bool has_sentence_head() const { return head != HeadType::kWord; }
  bool has_word_head() const { return head != HeadType::kSentence; }
  void validate() const;
  nlohmann::json to_json() const;
  static ArchConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchConfig&) const = default;
};

// Closed-form parameter count; must agree with the built model.
std::size_t param_count(const ArchConfig& c);

// Desk-scale edge configurations, sized so the three families stay within
// 15% of one another.
ArchConfig edge_config(Family family, HeadType head, std::size_t vocab_size);
// Shared-vocabulary transformer with a masked-token layer. scale 1 is the
// default pivot; scale 0 a smaller one for pivot-size comparisons.
ArchConfig pivot_config(std::size_t vocab_size, int scale = 1);

}  // namespace xlkd::models
