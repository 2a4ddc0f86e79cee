// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xlkd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a gated label is read through an unlabeled corpus view.
class LabelAccessError : public Error {
 public:
  LabelAccessError() : Error("label access in label-free pipeline") {}
};

// Shape or arity mismatch inside a tensor primitive.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& op, const std::string& detail)
      : Error(op + ": " + detail), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

// Non-finite loss or gradient during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace xlkd
