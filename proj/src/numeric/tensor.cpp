// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/numeric/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "xlkd/common/error.hpp"

namespace xlkd::numeric {

namespace {
std::atomic<Precision> g_precision{Precision::kFloat32};
}

Precision default_precision() { return g_precision.load(std::memory_order_relaxed); }
void set_default_precision(Precision p) { g_precision.store(p, std::memory_order_relaxed); }

PrecisionScope::PrecisionScope(Precision p) : saved_(default_precision()) {
  set_default_precision(p);
}
PrecisionScope::~PrecisionScope() { set_default_precision(saved_); }

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Precision p) : shape_(std::move(shape)) {
  const std::size_t n = shape_size(shape_);
  if (p == Precision::kFloat32)
    storage_ = std::vector<float>(n, 0.0f);
  else
    storage_ = std::vector<double>(n, 0.0);
}

Tensor Tensor::from(Shape shape, std::span<const double> values, Precision p) {
  Tensor t(std::move(shape), p);
  if (values.size() != t.size())
    throw ShapeError("tensor", "value count " + std::to_string(values.size()) +
                                   " does not match shape " + shape_string(t.shape_));
  dispatch(p, [&]<class T>(T) {
    auto d = t.data<T>();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(values[i]);
  });
  return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values, Precision p) {
  return from(std::move(shape), std::span<const double>(values.begin(), values.size()), p);
}

Tensor Tensor::scalar(double v, Precision p) { return from({1}, {v}, p); }

std::size_t Tensor::size() const {
  return std::visit([](const auto& v) { return v.size(); }, storage_);
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

std::size_t Tensor::rows() const {
  const std::size_t c = cols();
  return c == 0 ? 0 : size() / c;
}

Precision Tensor::precision() const {
  return std::holds_alternative<std::vector<float>>(storage_) ? Precision::kFloat32
                                                              : Precision::kFloat64;
}

double Tensor::get(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, storage_);
}

void Tensor::set(std::size_t i, double value) {
  std::visit([&](auto& v) { v[i] = static_cast<typename std::decay_t<decltype(v)>::value_type>(value); },
             storage_);
}

void Tensor::fill(double value) {
  std::visit(
      [&](auto& v) {
        std::fill(v.begin(), v.end(),
                  static_cast<typename std::decay_t<decltype(v)>::value_type>(value));
      },
      storage_);
}

void Tensor::add_(const Tensor& other) {
  if (other.size() != size())
    throw ShapeError("accumulate", shape_string(other.shape_) + " into " + shape_string(shape_));
  if (other.precision() != precision()) throw ShapeError("accumulate", "precision mismatch");
  dispatch(precision(), [&]<class T>(T) {
    auto dst = data<T>();
    auto src = other.data<T>();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size())
    throw ShapeError("reshape", shape_string(shape_) + " -> " + shape_string(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::converted(Precision p) const {
  if (p == precision()) return *this;
  Tensor t(shape_, p);
  for (std::size_t i = 0; i < size(); ++i) t.set(i, get(i));
  return t;
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get(i);
  return out;
}

std::vector<double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  std::vector<double> out(c);
  for (std::size_t j = 0; j < c; ++j) out[j] = get(r * c + j);
  return out;
}

}  // namespace xlkd::numeric
