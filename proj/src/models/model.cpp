// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/models/model.hpp"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"
#include "xlkd/common/seed.hpp"

namespace xlkd::models {

using namespace numeric;

namespace {

constexpr double kInitRange = 0.08;
constexpr int kFormatVersion = 1;

std::string layer(std::size_t l, const char* part) { return "layer" + std::to_string(l) + "." + part; }

}  // namespace

PackedBatch PackedBatch::pack(std::span<const Tokenization> batch) {
  PackedBatch out;
  for (const Tokenization& t : batch) {
    if (t.ids.empty() || t.ids.front() != tokenize::kBos || !t.bos)
      throw Error("model input must start with the sentence-start token");
    const std::size_t base = out.ids.size();
    out.segments.push_back({base, base + t.ids.size()});
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
      out.ids.push_back(t.ids[i]);
      out.positions.push_back(static_cast<int>(i));
    }
    for (std::size_t f : t.first_subword) out.first_subwords.push_back(static_cast<int>(base + f));
    out.words_per_example.push_back(t.num_words());
  }
  return out;
}

Parameter& EncoderModel::add_param(const std::string& name, Shape shape, Rng& rng, double fill) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.set(i, fill >= 0 ? fill : (2 * uniform01(rng) - 1) * kInitRange);
  if (index_.contains(name)) throw Error("duplicate parameter " + name);
  index_[name] = params_.size();
  params_.emplace_back(name, std::move(t));
  return params_.back();
}

void EncoderModel::add_head(Task task, Rng& rng) {
  const ArchConfig& c = config_;
  const bool sentence = task == Task::kSentence;
  const std::size_t n = sentence ? c.sentence_labels.size() : c.word_labels.size();
  if (n == 0) return;
  std::size_t feat = c.hidden;
  if (c.family == Family::kCnn && sentence) feat = c.kernels.size() * c.hidden;
  const std::string prefix = sentence ? "head.sentence." : "head.word.";
  add_param(prefix + "w", {feat, n}, rng);
  add_param(prefix + "b", {n}, rng);
}

EncoderModel EncoderModel::build(const ArchConfig& config, uint64_t seed) {
  config.validate();
  EncoderModel m;
  m.config_ = config;
  Rng rng = make_rng(seed, "init/" + to_string(config.family));
  const std::size_t V = config.vocab_size, E = config.embed, H = config.hidden;
  m.add_param("embed", {V, E}, rng);
  switch (config.family) {
    case Family::kTransformer: {
      m.add_param("pos", {config.max_len, H}, rng);
      if (E != H) {
        m.add_param("in_proj.w", {E, H}, rng);
        m.add_param("in_proj.b", {H}, rng);
      }
      const std::size_t F = config.ffn_mult * H;
      for (std::size_t l = 0; l < config.layers; ++l) {
        m.add_param(layer(l, "ln1.g"), {H}, rng, 1.0);
        m.add_param(layer(l, "ln1.b"), {H}, rng, 0.0);
        m.add_param(layer(l, "qkv.w"), {H, 3 * H}, rng);
        m.add_param(layer(l, "qkv.b"), {3 * H}, rng);
        m.add_param(layer(l, "out.w"), {H, H}, rng);
        m.add_param(layer(l, "out.b"), {H}, rng);
        m.add_param(layer(l, "ln2.g"), {H}, rng, 1.0);
        m.add_param(layer(l, "ln2.b"), {H}, rng, 0.0);
        m.add_param(layer(l, "ffn1.w"), {H, F}, rng);
        m.add_param(layer(l, "ffn1.b"), {F}, rng);
        m.add_param(layer(l, "ffn2.w"), {F, H}, rng);
        m.add_param(layer(l, "ffn2.b"), {H}, rng);
      }
      m.add_param("final_ln.g", {H}, rng, 1.0);
      m.add_param("final_ln.b", {H}, rng, 0.0);
      if (config.mlm) m.add_param("mlm.b", {V}, rng);
      break;
    }
    case Family::kBiLstm: {
      const std::size_t h = H / 2;
      std::size_t in = E;
      for (std::size_t l = 0; l < config.layers; ++l) {
        for (const char* dir : {"fw", "bw"}) {
          const std::string base = layer(l, dir);
          m.add_param(base + ".w", {in, 4 * h}, rng);
          m.add_param(base + ".b", {4 * h}, rng);
          m.add_param(base + ".u", {h, 4 * h}, rng);
        }
        in = H;
      }
      break;
    }
    case Family::kCnn: {
      if (config.has_sentence_head()) {
        for (std::size_t k : config.kernels) {
          std::size_t in = E;
          for (std::size_t l = 0; l < config.layers; ++l) {
            const std::string base = "conv" + std::to_string(k) + "." + std::to_string(l);
            m.add_param(base + ".w", {k * in, H}, rng);
            m.add_param(base + ".b", {H}, rng);
            in = H;
          }
        }
      }
      if (config.has_word_head()) {
        std::size_t in = E;
        for (std::size_t l = 0; l < config.dilations.size(); ++l) {
          const std::string base = "dconv." + std::to_string(l);
          m.add_param(base + ".w", {3 * in, H}, rng);
          m.add_param(base + ".b", {H}, rng);
          in = H;
        }
      }
      break;
    }
  }
  if (config.has_sentence_head()) m.add_head(Task::kSentence, rng);
  if (config.has_word_head()) m.add_head(Task::kWord, rng);
  return m;
}

Parameter& EncoderModel::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("model has no parameter " + name);
  return params_[it->second];
}

const Parameter& EncoderModel::param(const std::string& name) const {
  return const_cast<EncoderModel*>(this)->param(name);
}

std::size_t EncoderModel::num_parameters() const {
  std::size_t n = 0;
  for (const Parameter& q : params_) n += q.value.size();
  return n;
}

void EncoderModel::zero_grad() {
  for (Parameter& q : params_) q.zero_grad();
}

// Graph leaves alias parameters; forward passes never write to them.
Var EncoderModel::p(Graph& g, const std::string& name) const {
  return g.parameter(const_cast<Parameter&>(param(name)));
}

Var EncoderModel::sequence_states(Graph& g, const PackedBatch& b) const {
  const ArchConfig& c = config_;
  Var x = embedding(p(g, "embed"), b.ids);
  switch (c.family) {
    case Family::kTransformer: {
      for (const numeric::Segment& s : b.segments)
        if (s.end - s.begin > c.max_len)
          throw Error("transformer: sequence of " + std::to_string(s.end - s.begin) +
                      " subwords exceeds positional table of " + std::to_string(c.max_len));
      if (c.embed != c.hidden) x = add(matmul(x, p(g, "in_proj.w")), p(g, "in_proj.b"));
      x = dropout(add(x, embedding(p(g, "pos"), b.positions)), c.dropout);
      const std::size_t H = c.hidden;
      for (std::size_t l = 0; l < c.layers; ++l) {
        Var h = layer_norm(x, p(g, layer(l, "ln1.g")), p(g, layer(l, "ln1.b")));
        Var qkv = add(matmul(h, p(g, layer(l, "qkv.w"))), p(g, layer(l, "qkv.b")));
        Var a = attention(slice_cols(qkv, 0, H), slice_cols(qkv, H, 2 * H), slice_cols(qkv, 2 * H, 3 * H),
                          static_cast<int>(c.heads), b.segments);
        x = add(x, dropout(add(matmul(a, p(g, layer(l, "out.w"))), p(g, layer(l, "out.b"))), c.dropout));
        h = layer_norm(x, p(g, layer(l, "ln2.g")), p(g, layer(l, "ln2.b")));
        Var f = relu(add(matmul(h, p(g, layer(l, "ffn1.w"))), p(g, layer(l, "ffn1.b"))));
        f = add(matmul(f, p(g, layer(l, "ffn2.w"))), p(g, layer(l, "ffn2.b")));
        x = add(x, dropout(f, c.dropout));
      }
      return layer_norm(x, p(g, "final_ln.g"), p(g, "final_ln.b"));
    }
    case Family::kBiLstm: {
      x = dropout(x, c.dropout);
      for (std::size_t l = 0; l < c.layers; ++l) {
        std::vector<Var> dirs;
        for (const char* dir : {"fw", "bw"}) {
          const std::string base = layer(l, dir);
          Var xw = add(matmul(x, p(g, base + ".w")), p(g, base + ".b"));
          dirs.push_back(lstm(xw, p(g, base + ".u"), b.segments, dir[0] == 'b'));
        }
        x = dropout(concat(dirs, 1), c.dropout);
      }
      return x;
    }
    case Family::kCnn: {
      x = dropout(x, c.dropout);
      for (std::size_t l = 0; l < c.dilations.size(); ++l) {
        const std::string base = "dconv." + std::to_string(l);
        x = relu(conv1d(x, p(g, base + ".w"), p(g, base + ".b"), 3, static_cast<int>(c.dilations[l]), b.segments));
      }
      return dropout(x, c.dropout);
    }
  }
  throw Error("unreachable");
}

Var EncoderModel::sentence_features(Graph& g, const PackedBatch& b) const {
  const ArchConfig& c = config_;
  switch (c.family) {
    case Family::kTransformer: {
      std::vector<int> first;
      for (const numeric::Segment& s : b.segments) first.push_back(static_cast<int>(s.begin));
      return rows(sequence_states(g, b), first);
    }
    case Family::kBiLstm: {
      std::vector<int> last;
      for (const numeric::Segment& s : b.segments) last.push_back(static_cast<int>(s.end - 1));
      return rows(sequence_states(g, b), last);
    }
    case Family::kCnn: {
      Var x = dropout(embedding(p(g, "embed"), b.ids), c.dropout);
      std::vector<Var> pooled;
      for (std::size_t k : c.kernels) {
        Var h = x;
        for (std::size_t l = 0; l < c.layers; ++l) {
          const std::string base = "conv" + std::to_string(k) + "." + std::to_string(l);
          h = relu(conv1d(h, p(g, base + ".w"), p(g, base + ".b"), static_cast<int>(k), 1, b.segments));
        }
        pooled.push_back(max_over_time(h, b.segments));
      }
      return dropout(concat(pooled, 1), c.dropout);
    }
  }
  throw Error("unreachable");
}

Var EncoderModel::sentence_log_probs(Graph& g, const PackedBatch& b) const {
  if (!has_param("head.sentence.w")) throw Error("model has no sentence head");
  return log_softmax(add(matmul(sentence_features(g, b), p(g, "head.sentence.w")), p(g, "head.sentence.b")));
}

Var EncoderModel::word_log_probs(Graph& g, const PackedBatch& b) const {
  if (!has_param("head.word.w")) throw Error("model has no word head");
  Var states = rows(sequence_states(g, b), b.first_subwords);
  return log_softmax(add(matmul(states, p(g, "head.word.w")), p(g, "head.word.b")));
}

Var EncoderModel::log_probs(Graph& g, const PackedBatch& b, Task task) const {
  return task == Task::kSentence ? sentence_log_probs(g, b) : word_log_probs(g, b);
}

Var EncoderModel::mlm_log_probs(Graph& g, const PackedBatch& b, std::span<const int> at) const {
  if (!config_.mlm) throw Error("model has no masked-token layer");
  Var states = rows(sequence_states(g, b), at);
  return log_softmax(add(matmul(states, p(g, "embed"), /*transpose_b=*/true), p(g, "mlm.b")));
}

PredictionSet EncoderModel::predict(std::span<const Tokenization> batch, std::span<const std::string> ids, Task task,
                                    std::size_t batch_size) const {
  if (ids.size() != batch.size()) throw Error("predict: ids and inputs differ in length");
  PredictionSet out;
  out.task = task;
  out.categories = task == Task::kSentence ? config_.sentence_labels : config_.word_labels;
  out.ids.assign(ids.begin(), ids.end());
  const std::size_t C = out.categories.size();
  for (std::size_t start = 0; start < batch.size(); start += batch_size) {
    const std::size_t end = std::min(batch.size(), start + batch_size);
    PackedBatch packed = PackedBatch::pack(batch.subspan(start, end - start));
    Graph g(false);
    const Tensor& lp = log_probs(g, packed, task).value();
    std::size_t row = 0;
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t n = task == Task::kSentence ? 1 : packed.words_per_example[i - start];
      std::vector<double> probs(n * C);
      for (std::size_t r = 0; r < n; ++r, ++row)
        for (std::size_t k = 0; k < C; ++k) probs[r * C + k] = std::exp(lp.at(row, k));
      out.probs.push_back(std::move(probs));
    }
  }
  return out;
}

void EncoderModel::reset_head(Task task, std::vector<std::string> labels, uint64_t seed) {
  const bool sentence = task == Task::kSentence;
  const std::string prefix = sentence ? "head.sentence." : "head.word.";
  (sentence ? config_.sentence_labels : config_.word_labels) = std::move(labels);
  if (sentence && config_.head == HeadType::kWord) config_.head = HeadType::kBoth;
  if (!sentence && config_.head == HeadType::kSentence) config_.head = HeadType::kBoth;
  if (config_.family == Family::kCnn) {
    // CNN encoders are head-specific; the other branch must already exist.
    if ((sentence && !has_param("conv" + std::to_string(config_.kernels[0]) + ".0.w")) ||
        (!sentence && !has_param("dconv.0.w")))
      throw Error("cnn model has no encoder for the " + to_string(task) + " task");
  }
  std::vector<Parameter> kept;
  for (Parameter& q : params_)
    if (!q.name.starts_with(prefix)) kept.push_back(std::move(q));
  params_ = std::move(kept);
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_[params_[i].name] = i;
  Rng rng = make_rng(seed, "head/" + to_string(task));
  add_head(task, rng);
}

std::string EncoderModel::serialize() const {
  static_assert(std::endian::native == std::endian::little, "model files store little-endian floats");
  nlohmann::ordered_json j;
  j["format"] = kFormatVersion;
  j["config"] = config_.to_json();
  j["vocab_hash"] = vocab_hash_;
  j["params"] = nlohmann::json::array();
  for (const Parameter& q : params_) {
    Tensor f = q.value.converted(Precision::kFloat32);
    auto data = f.data<float>();
    std::vector<uint8_t> bytes(data.size() * sizeof(float));
    std::memcpy(bytes.data(), data.data(), bytes.size());
    j["params"].push_back({{"name", q.name}, {"shape", q.value.shape()}, {"data", base64_encode(bytes)}});
  }
  return j.dump() + "\n";
}

EncoderModel EncoderModel::deserialize(const std::string& text) {
  EncoderModel m;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("format").get<int>() != kFormatVersion) throw SchemaError("model: unsupported format version");
    m.config_ = ArchConfig::from_json(j.at("config"));
    m.vocab_hash_ = j.at("vocab_hash").get<std::string>();
    for (const auto& e : j.at("params")) {
      Shape shape = e.at("shape").get<Shape>();
      std::vector<uint8_t> bytes = base64_decode(e.at("data").get<std::string>());
      Tensor t(shape, Precision::kFloat32);
      if (bytes.size() != t.size() * sizeof(float)) throw SchemaError("model: parameter " + e.at("name").get<std::string>() + " has wrong byte count");
      std::memcpy(t.data<float>().data(), bytes.data(), bytes.size());
      std::string name = e.at("name").get<std::string>();
      m.index_[name] = m.params_.size();
      m.params_.emplace_back(name, t.converted(default_precision()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
  if (param_count(m.config_) != m.num_parameters()) throw SchemaError("model: parameter count does not match config");
  return m;
}

void EncoderModel::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

EncoderModel EncoderModel::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string EncoderModel::param_hash() const {
  std::string bytes;
  for (const Parameter& q : params_) {
    bytes += q.name;
    bytes += shape_string(q.value.shape());
    Tensor f = q.value.converted(Precision::kFloat32);
    auto data = f.data<float>();
    bytes.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
  }
  return sha256_hex(bytes);
}

}  // namespace xlkd::models
