// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xlkd/models/config.hpp"
#include "xlkd/models/predictions.hpp"
#include "xlkd/numeric/graph.hpp"
#include "xlkd/numeric/ops.hpp"
#include "xlkd/tokenize/bpe.hpp"

namespace xlkd::models {

using numeric::Graph;
using numeric::Parameter;
using numeric::Var;
using tokenize::Tokenization;

// Sequences of one batch laid end to end.
struct PackedBatch {
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<numeric::Segment> segments;
  // Packed row of every word's first subword, batch order.
  std::vector<int> first_subwords;
  std::vector<std::size_t> words_per_example;

  static PackedBatch pack(std::span<const Tokenization> batch);
};

class EncoderModel {
 public:
  EncoderModel() = default;
  static EncoderModel build(const ArchConfig& config, uint64_t seed);

  const ArchConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;
  bool has_param(const std::string& name) const { return index_.contains(name); }
  std::size_t num_parameters() const;
  void zero_grad();

  const std::string& vocab_hash() const { return vocab_hash_; }
  void set_vocab_hash(std::string h) { vocab_hash_ = std::move(h); }

  // Differentiable forward passes. Every tokenization must start with the
  // sentence-start token. Dropout is active when the graph is in training mode.
  Var sentence_log_probs(Graph& g, const PackedBatch& batch) const;  // [batch x C]
  Var word_log_probs(Graph& g, const PackedBatch& batch) const;      // [words x C]
  Var log_probs(Graph& g, const PackedBatch& batch, Task task) const;
  // Masked-token log-probabilities at the given packed rows -> [rows x vocab].
  Var mlm_log_probs(Graph& g, const PackedBatch& batch, std::span<const int> rows) const;

  // Eval-mode inference in mini-batches.
  PredictionSet predict(std::span<const Tokenization> batch, std::span<const std::string> ids, Task task,
                        std::size_t batch_size = 64) const;

  // Replace a task head with freshly initialized weights over `labels`.
  void reset_head(Task task, std::vector<std::string> labels, uint64_t seed);

  std::string serialize() const;
  static EncoderModel deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static EncoderModel load(const std::filesystem::path& path);
  // SHA-256 over parameter names, shapes and float32 values.
  std::string param_hash() const;

 private:
  Parameter& add_param(const std::string& name, numeric::Shape shape, Rng& rng, double fill = -1);
  void add_head(Task task, Rng& rng);
  Var p(Graph& g, const std::string& name) const;
  Var sequence_states(Graph& g, const PackedBatch& batch) const;
  Var sentence_features(Graph& g, const PackedBatch& batch) const;

  ArchConfig config_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string vocab_hash_;
};

}  // namespace xlkd::models
