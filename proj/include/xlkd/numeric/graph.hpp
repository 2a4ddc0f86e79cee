// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "xlkd/common/seed.hpp"
#include "xlkd/numeric/tensor.hpp"

namespace xlkd::numeric {

// A trainable tensor owned outside any graph. Gradients from every graph
// that references it accumulate into `grad` until zero_grad().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape(), value.precision()) {}
  void zero_grad() { grad.fill(0.0); }
};

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Graph* graph() const { return graph_; }
  uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* g, uint32_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  uint32_t id_ = 0;
};

// Receives the graph, the node's forward value and the gradient flowing into it.
using BackwardFn = std::function<void(Graph&, const Tensor& value, const Tensor& grad)>;

// Records operations in construction order; backward replays them in exact
// reverse order. Confined to one thread.
class Graph {
 public:
  explicit Graph(bool training = false, uint64_t seed = 0);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Differentiable leaf owned by the graph (used by gradient checks).
  Var variable(Tensor value);
  // Leaf aliasing an external parameter; its gradient lands in p.grad.
  Var parameter(Parameter& p);

  const Tensor& value(Var v) const;
  // Gradient accumulated at v by the last backward(), or nullptr.
  const Tensor* grad(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op_name(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(output)/d(output) = 1 and propagates. Intermediate gradients are
  // reset first; leaf and parameter gradients keep accumulating, so two
  // backward calls equal one backward through the sum of both outputs.
  void backward(Var output);
  // Node ids in the order visited by the most recent backward().
  const std::vector<uint32_t>& backward_trace() const { return trace_; }

  bool training() const { return training_; }
  Rng& rng() { return rng_; }

  // Primitive authoring interface.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn);
  Tensor& grad_slot(Var v);

 private:
  struct Node {
    const char* op = "";
    Tensor own_value;
    const Tensor* external_value = nullptr;
    Tensor own_grad;
    Tensor* external_grad = nullptr;
    bool has_grad = false;
    bool requires_grad = false;
    bool leaf = false;
    BackwardFn backward;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  Node& node(Var v);

  std::deque<Node> nodes_;
  std::vector<uint32_t> trace_;
  bool training_;
  Rng rng_;
};

}  // namespace xlkd::numeric
