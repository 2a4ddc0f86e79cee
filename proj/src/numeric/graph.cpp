// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/numeric/graph.hpp"

#include "xlkd/common/error.hpp"

namespace xlkd::numeric {

const Tensor& Var::value() const { return graph_->value(*this); }

Graph::Graph(bool training, uint64_t seed) : training_(training), rng_(seed) {}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<uint32_t>(nodes_.size() - 1));
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw Error("graph: foreign or invalid Var");
  return nodes_[v.id_];
}

Graph::Node& Graph::node(Var v) {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw Error("graph: foreign or invalid Var");
  return nodes_[v.id_];
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.own_value = std::move(value);
  n.leaf = true;
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.own_value = std::move(value);
  n.requires_grad = true;
  n.leaf = true;
  return push(std::move(n));
}

Var Graph::parameter(Parameter& p) {
  if (p.grad.size() != p.value.size() || p.grad.precision() != p.value.precision())
    p.grad = Tensor(p.value.shape(), p.value.precision());
  Node n;
  n.op = "parameter";
  n.external_value = &p.value;
  n.external_grad = &p.grad;
  n.requires_grad = true;
  n.leaf = true;
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.external_value ? *n.external_value : n.own_value;
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.external_grad) return n.external_grad;
  return n.has_grad ? &n.own_grad : nullptr;
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

std::string_view Graph::op_name(Var v) const { return node(v).op; }

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Graph::record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.op = op;
  for (Var in : inputs) {
    const Node& src = node(in);
    const Tensor& sv = src.external_value ? *src.external_value : src.own_value;
    if (sv.precision() != value.precision()) throw ShapeError(op, "mixed precision inputs");
    n.requires_grad = n.requires_grad || src.requires_grad;
  }
  n.own_value = std::move(value);
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Graph::grad_slot(Var v) {
  Node& n = node(v);
  if (n.external_grad) return *n.external_grad;
  if (!n.has_grad) {
    const Tensor& val = n.external_value ? *n.external_value : n.own_value;
    n.own_grad = Tensor(val.shape(), val.precision());
    n.has_grad = true;
  }
  return n.own_grad;
}

void Graph::backward(Var output) {
  Node& out = node(output);
  const Tensor& out_value = out.external_value ? *out.external_value : out.own_value;
  if (out_value.size() != 1)
    throw ShapeError("backward", "output must hold one element, got " + shape_string(out_value.shape()));
  for (Node& n : nodes_) {
    if (!n.leaf && n.has_grad) {
      n.has_grad = false;
      n.own_grad = Tensor();
    }
  }
  trace_.clear();
  if (!out.requires_grad) return;
  Tensor& seed = grad_slot(output);
  seed.add_(Tensor::from(out_value.shape(), {1.0}, out_value.precision()));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || !n.has_grad) continue;
    trace_.push_back(static_cast<uint32_t>(i));
    n.backward(*this, n.own_value, n.own_grad);
  }
}

}  // namespace xlkd::numeric
