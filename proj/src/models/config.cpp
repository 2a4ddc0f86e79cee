// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/models/config.hpp"

#include <nlohmann/json.hpp>

#include "xlkd/common/error.hpp"

namespace xlkd::models {

std::string to_string(Family f) {
  switch (f) {
    case Family::kTransformer: return "transformer";
    case Family::kBiLstm: return "bilstm";
    case Family::kCnn: return "cnn";
  }
  return "?";
}

std::string to_string(Task t) { return t == Task::kSentence ? "sentence" : "word"; }

Family parse_family(const std::string& s) {
  if (s == "transformer") return Family::kTransformer;
  if (s == "bilstm") return Family::kBiLstm;
  if (s == "cnn") return Family::kCnn;
  throw SchemaError("unknown architecture family '" + s + "'");
}

Task parse_task(const std::string& s) {
  if (s == "sentence") return Task::kSentence;
  if (s == "word") return Task::kWord;
  throw SchemaError("unknown task '" + s + "'");
}

namespace {

std::string head_name(HeadType h) {
  switch (h) {
    case HeadType::kSentence: return "sentence";
    case HeadType::kWord: return "word";
    case HeadType::kBoth: return "both";
  }
  return "?";
}

HeadType parse_head(const std::string& s) {
  if (s == "sentence") return HeadType::kSentence;
  if (s == "word") return HeadType::kWord;
  if (s == "both") return HeadType::kBoth;
  throw SchemaError("unknown head type '" + s + "'");
}

}  // namespace

void ArchConfig::validate() const {
  auto fail = [&](const std::string& what) { throw SchemaError("arch " + to_string(family) + ": " + what); };
  if (vocab_size <= 4) fail("vocab size not set");
  if (embed == 0 || hidden == 0 || layers == 0) fail("zero-sized dimension");
  if (dropout < 0 || dropout >= 1) fail("dropout outside [0, 1)");
  // A pretraining pivot may carry no task head yet.
  if (has_sentence_head() && sentence_labels.empty() && !mlm) fail("sentence head without labels");
  if (has_word_head() && word_labels.empty() && !mlm) fail("word head without labels");
  switch (family) {
    case Family::kTransformer:
      if (heads == 0 || hidden % heads != 0) fail("hidden size not divisible by heads");
      if (max_len < 2) fail("max_len too small");
      if (mlm && embed != hidden) fail("tied masked-token layer needs embed == hidden");
      break;
    case Family::kBiLstm:
      if (hidden % 2 != 0) fail("bidirectional hidden size must be even");
      if (mlm) fail("masked-token layer is transformer-only");
      break;
    case Family::kCnn:
      if (kernels.empty() || dilations.empty()) fail("no kernels or dilations");
      if (mlm) fail("masked-token layer is transformer-only");
      break;
  }
}

nlohmann::json ArchConfig::to_json() const {
  return {{"family", to_string(family)}, {"embed", embed},       {"hidden", hidden},
          {"layers", layers},            {"heads", heads},       {"ffn_mult", ffn_mult},
          {"vocab_size", vocab_size},    {"max_len", max_len},   {"head", head_name(head)},
          {"sentence_labels", sentence_labels}, {"word_labels", word_labels}, {"dropout", dropout},
          {"size", size == SizeClass::kEdge ? "edge" : "pivot"}, {"kernels", kernels},
          {"dilations", dilations},      {"mlm", mlm}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
  ArchConfig c;
  try {
    c.family = parse_family(j.at("family").get<std::string>());
    c.embed = j.at("embed").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.value("heads", c.heads);
    c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_len = j.value("max_len", c.max_len);
    c.head = parse_head(j.at("head").get<std::string>());
    c.sentence_labels = j.value("sentence_labels", std::vector<std::string>{});
    c.word_labels = j.value("word_labels", std::vector<std::string>{});
    c.dropout = j.value("dropout", c.dropout);
    c.size = j.value("size", std::string("edge")) == "pivot" ? SizeClass::kPivot : SizeClass::kEdge;
    c.kernels = j.value("kernels", c.kernels);
    c.dilations = j.value("dilations", c.dilations);
    c.mlm = j.value("mlm", false);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("arch config: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t param_count(const ArchConfig& c) {
  const std::size_t V = c.vocab_size, E = c.embed, H = c.hidden;
  std::size_t n = V * E;
  std::size_t feat_sentence = 0, feat_word = 0;
  switch (c.family) {
    case Family::kTransformer: {
      n += c.max_len * H;
      if (E != H) n += E * H + H;
      const std::size_t F = c.ffn_mult * H;
      n += c.layers * (4 * H + (H * 3 * H + 3 * H) + (H * H + H) + (H * F + F) + (F * H + H));
      n += 2 * H;  // final layer norm
      feat_sentence = feat_word = H;
      if (c.mlm) n += V;
      break;
    }
    case Family::kBiLstm: {
      const std::size_t h = H / 2;
      std::size_t in = E;
      for (std::size_t l = 0; l < c.layers; ++l) {
        n += 2 * (in * 4 * h + 4 * h + h * 4 * h);
        in = H;
      }
      feat_sentence = feat_word = H;
      break;
    }
    case Family::kCnn: {
      if (c.has_sentence_head()) {
        for (std::size_t k : c.kernels) {
          std::size_t in = E;
          for (std::size_t l = 0; l < c.layers; ++l) {
            n += k * in * H + H;
            in = H;
          }
        }
        feat_sentence = c.kernels.size() * H;
      }
      if (c.has_word_head()) {
        std::size_t in = E;
        for (std::size_t l = 0; l < c.dilations.size(); ++l) {
          n += 3 * in * H + H;
          in = H;
        }
        feat_word = H;
      }
      break;
    }
  }
  if (c.has_sentence_head()) n += feat_sentence * c.sentence_labels.size() + c.sentence_labels.size();
  if (c.has_word_head()) n += feat_word * c.word_labels.size() + c.word_labels.size();
  return n;
}

ArchConfig edge_config(Family family, HeadType head, std::size_t vocab_size) {
  ArchConfig c;
  c.family = family;
  c.head = head;
  c.vocab_size = vocab_size;
  c.embed = 64;
  c.layers = 2;
  switch (family) {
    case Family::kTransformer:
      c.hidden = 64;
      c.heads = 2;
      break;
    case Family::kBiLstm:
      c.hidden = 96;
      break;
    case Family::kCnn:
      // Sentence branches use `hidden` channels; the two dilated layers of the
      // word encoder are wider to keep the parameter budget comparable.
      c.hidden = head == HeadType::kWord ? 144 : 64;
      break;
  }
  return c;
}

ArchConfig pivot_config(std::size_t vocab_size, int scale) {
  ArchConfig c;
  c.family = Family::kTransformer;
  c.size = SizeClass::kPivot;
  c.vocab_size = vocab_size;
  c.mlm = true;
  c.head = HeadType::kBoth;
  if (scale <= 0) {
    c.embed = c.hidden = 96;
    c.layers = 2;
    c.heads = 4;
  } else {
    c.embed = c.hidden = 112;
    c.layers = 2;
    c.heads = 4;
  }
  return c;
}

}  // namespace xlkd::models
