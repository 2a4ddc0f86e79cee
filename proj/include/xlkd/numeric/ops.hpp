// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "xlkd/numeric/graph.hpp"

namespace xlkd::numeric {

// Floor applied to log and division arguments.
inline constexpr double kNumericFloor = 1e-12;

// Rows [begin, end) of a packed batch that belong to one sequence.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
};
using Segments = std::span<const Segment>;

// All primitives treat a tensor as a matrix of rows x cols where cols is the
// trailing extent; rank-1 tensors are single rows.

Var matmul(Var a, Var b, bool transpose_b = false);
// Same shapes, or b a single row broadcast across the rows of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Denominator magnitude clamped at kNumericFloor (sign preserved).
Var div(Var a, Var b);
Var scale(Var a, double s);

// Rows of `table` selected by ids -> [ids.size() x dim].
Var embedding(Var table, std::span<const int> ids);

Var softmax(Var a);
Var log_softmax(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

// x: [length x in], weight: [(kernel*in) x out], bias: [out]. Zero "same"
// padding: output length equals input length for any kernel and dilation.
// With segments, each sequence is padded on its own and windows never cross
// a segment boundary.
Var conv1d(Var x, Var weight, Var bias, int kernel, int dilation, Segments segments = {});
// Column-wise max over rows -> [1 x cols], or one row per segment.
// Ties route gradient to the first row.
Var max_over_time(Var x, Segments segments = {});

// Scaled dot-product self-attention inside each segment. q, k, v are
// [rows x d]; columns are split into `heads` equal groups.
Var attention(Var q, Var k, Var v, int heads, Segments segments);
// LSTM recurrence inside each segment. xw: [rows x 4h] input projection
// (gate order i, f, g, o, bias included), u: [h x 4h]. Zero initial state.
// reverse runs each segment from its last row to its first.
Var lstm(Var xw, Var u, Segments segments, bool reverse);

// axis 0 stacks rows, axis 1 joins columns.
Var concat(const std::vector<Var>& xs, int axis);
Var rows(Var x, std::span<const int> index);
Var slice_cols(Var x, std::size_t begin, std::size_t end);

Var sum(Var x);
Var mean(Var x);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Inverted dropout. Identity unless the graph is in training mode.
Var dropout(Var x, double rate);

// Sum over rows of KL(teacher_row || exp(student_row)). Zero-probability
// teacher entries contribute nothing; student log-probabilities are floored
// at log(kNumericFloor).
Var kl_div(Var student_log_probs, const Tensor& teacher_probs);
// Sum over rows of -log_probs[row, target[row]].
Var nll(Var log_probs, std::span<const int> targets);

}  // namespace xlkd::numeric
