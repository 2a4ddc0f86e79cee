// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/cli/config.hpp"

#include <set>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"

namespace xlkd::cli {
namespace {

void only_keys(const nlohmann::json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw SchemaError("run config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw SchemaError("run config: unknown key '" + key + "' in '" + where + "'");
}

}  // namespace

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["languages"] = languages.string();
  j["reorder"] = reorder;
  j["data"] = {{"annotated_train", data.annotated_train},
               {"unannotated_train", data.unannotated_train},
               {"validation", data.validation},
               {"test", data.test}};
  j["vocab"] = {{"per_language", vocab_size}, {"shared", shared_vocab_size}};
  j["task"] = models::to_string(task);
  j["arch"] = models::to_string(arch);
  j["target_arch"] = models::to_string(target_arch);
  j["pipeline"] = {{"balanced", balanced}, {"augment", augment}};
  j["pivot"] = {{"size", pivot.size},
                {"sentences_per_language", pivot.sentences_per_language},
                {"heldout", pivot.heldout},
                {"steps", pivot.pretrain.steps},
                {"batch_size", pivot.pretrain.batch_size},
                {"lr", pivot.pretrain.lr},
                {"mask_rate", pivot.pretrain.mask_rate}};
  nlohmann::json t = train.to_json();
  t.erase("seed");
  j["train"] = t;
  j["out"] = out.string();
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  only_keys(j, "config", {"seed", "languages", "reorder", "data", "vocab", "task", "arch", "target_arch", "pipeline",
                          "pivot", "train", "out"});
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("languages")) {
      c.languages = j["languages"].get<std::string>();
      if (c.languages.is_relative() && !base_dir.empty()) c.languages = base_dir / c.languages;
    }
    c.reorder = j.value("reorder", c.reorder);
    if (j.contains("data")) {
      const auto& d = j["data"];
      only_keys(d, "data", {"annotated_train", "unannotated_train", "validation", "test"});
      c.data.annotated_train = d.value("annotated_train", c.data.annotated_train);
      c.data.unannotated_train = d.value("unannotated_train", c.data.unannotated_train);
      c.data.validation = d.value("validation", c.data.validation);
      c.data.test = d.value("test", c.data.test);
    }
    if (j.contains("vocab")) {
      only_keys(j["vocab"], "vocab", {"per_language", "shared"});
      c.vocab_size = j["vocab"].value("per_language", c.vocab_size);
      c.shared_vocab_size = j["vocab"].value("shared", c.shared_vocab_size);
    }
    if (j.contains("task")) c.task = models::parse_task(j["task"].get<std::string>());
    if (j.contains("arch")) c.arch = models::parse_family(j["arch"].get<std::string>());
    if (j.contains("target_arch")) c.target_arch = models::parse_family(j["target_arch"].get<std::string>());
    if (j.contains("pipeline")) {
      only_keys(j["pipeline"], "pipeline", {"balanced", "augment"});
      c.balanced = j["pipeline"].value("balanced", c.balanced);
      c.augment = j["pipeline"].value("augment", c.augment);
    }
    if (j.contains("pivot")) {
      const auto& p = j["pivot"];
      only_keys(p, "pivot", {"size", "sentences_per_language", "heldout", "steps", "batch_size", "lr", "mask_rate"});
      c.pivot.size = p.value("size", c.pivot.size);
      c.pivot.sentences_per_language = p.value("sentences_per_language", c.pivot.sentences_per_language);
      c.pivot.heldout = p.value("heldout", c.pivot.heldout);
      c.pivot.pretrain.steps = p.value("steps", c.pivot.pretrain.steps);
      c.pivot.pretrain.batch_size = p.value("batch_size", c.pivot.pretrain.batch_size);
      c.pivot.pretrain.lr = p.value("lr", c.pivot.pretrain.lr);
      c.pivot.pretrain.mask_rate = p.value("mask_rate", c.pivot.pretrain.mask_rate);
    }
    if (j.contains("train")) {
      only_keys(j["train"], "train", {"epochs", "patience", "batch_size", "lr", "beta1", "beta2", "eps", "weight_decay",
                                      "clip_norm", "range_batches"});
      c.train = train::TrainSettings::from_json(j["train"]);
    }
    if (j.contains("out")) c.out = j["out"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("run config: ") + e.what());
  }
  if (c.pivot.size < 0 || c.pivot.size > 1) throw SchemaError("run config: pivot size must be 0 or 1");
  if (c.vocab_size == 0 || c.shared_vocab_size == 0) throw SchemaError("run config: vocabulary sizes must be positive");
  if (c.data.unannotated_train == 0 || c.data.validation == 0 || c.data.test == 0 || c.data.annotated_train == 0)
    throw SchemaError("run config: every split needs at least one example");
  if (c.pivot.heldout >= c.pivot.sentences_per_language)
    throw SchemaError("run config: pivot heldout leaves no pretraining text");
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("run config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string RunConfig::hash() const {
  nlohmann::ordered_json j = to_json();
  for (const char* key : {"out", "task", "arch", "target_arch", "pipeline"}) j.erase(key);
  j["pivot"].erase("size");
  // The language file enters by content, not by path.
  j["languages"] = sha256_file(languages);
  return sha256_hex(j.dump());
}

}  // namespace xlkd::cli
