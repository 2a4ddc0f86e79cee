// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace xlkd::numeric {

enum class Precision { kFloat32, kFloat64 };

// Process-wide default for newly created tensors. Training runs in 32-bit;
// gradient checks flip to 64-bit through PrecisionScope.
Precision default_precision();
void set_default_precision(Precision p);

class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

// Invokes fn(T{}) with T = float or double according to p.
template <class Fn>
decltype(auto) dispatch(Precision p, Fn&& fn) {
  if (p == Precision::kFloat32) return fn(float{});
  return fn(double{});
}

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_string(const Shape& s);

// Dense row-major storage. Value semantics; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Precision p = default_precision());
  static Tensor from(Shape shape, std::span<const double> values,
                     Precision p = default_precision());
  static Tensor from(Shape shape, std::initializer_list<double> values,
                     Precision p = default_precision());
  static Tensor scalar(double v, Precision p = default_precision());

  const Shape& shape() const { return shape_; }
  std::size_t size() const;
  std::size_t rank() const { return shape_.size(); }
  // Extent of the trailing dimension; rows() is everything before it.
  std::size_t cols() const;
  std::size_t rows() const;
  bool empty() const { return size() == 0; }
  Precision precision() const;

  template <class T>
  std::span<T> data() {
    return std::get<std::vector<T>>(storage_);
  }
  template <class T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(storage_);
  }

  double get(std::size_t i) const;
  void set(std::size_t i, double v);
  double at(std::size_t r, std::size_t c) const { return get(r * cols() + c); }

  void fill(double v);
  void add_(const Tensor& other);  // in-place elementwise accumulate
  Tensor reshaped(Shape shape) const;
  Tensor converted(Precision p) const;
  std::vector<double> to_vector() const;
  std::vector<double> row(std::size_t r) const;

 private:
  Shape shape_;
  std::variant<std::vector<float>, std::vector<double>> storage_;
};

}  // namespace xlkd::numeric
