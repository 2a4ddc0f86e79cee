// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "xlkd/common/error.hpp"
#include "xlkd/numeric/gradcheck.hpp"
#include "xlkd/numeric/ops.hpp"
#include "support/gradcheck_cases.hpp"

namespace xlkd::numeric {
namespace {

using testing_support::primitive_cases;
using testing_support::random_tensor;
using testing_support::weighted_sum;

TEST(NumericTest, SoftmaxOfZerosIsUniform) {
  Graph g;
  Var y = softmax(g.constant(Tensor::from({2}, {0.0, 0.0})));
  EXPECT_DOUBLE_EQ(y.value().get(0), 0.5);
  EXPECT_DOUBLE_EQ(y.value().get(1), 0.5);
}

TEST(NumericTest, LogSoftmaxGradientAtSymmetricPointIsSymmetric) {
  PrecisionScope scope(Precision::kFloat64);
  auto grad_for = [](double w0, double w1) {
    Graph g;
    Var x = g.variable(Tensor::from({2}, {0.0, 0.0}));
    Var y = sum(mul(log(softmax(x)), g.constant(Tensor::from({2}, {w0, w1}))));
    g.backward(y);
    return g.grad(x)->to_vector();
  };
  auto same = grad_for(1.0, 1.0);
  EXPECT_NEAR(same[0], same[1], 1e-15);
  auto ab = grad_for(0.3, 1.7);
  auto ba = grad_for(1.7, 0.3);
  EXPECT_NEAR(ab[0], ba[1], 1e-15);
  EXPECT_NEAR(ab[1], ba[0], 1e-15);
}

TEST(NumericTest, DilatedConvKeepsLength) {
  Rng rng(1);
  Graph g;
  Var x = g.constant(random_tensor({5, 2}, rng));
  Var w = g.constant(random_tensor({3 * 2, 4}, rng));
  Var b = g.constant(random_tensor({4}, rng));
  Var y = conv1d(x, w, b, 3, 2);
  EXPECT_EQ(y.value().rows(), 5u);
  EXPECT_EQ(y.value().cols(), 4u);
  // Even kernels pad asymmetrically but still keep the length.
  Var w4 = g.constant(random_tensor({4 * 2, 4}, rng));
  EXPECT_EQ(conv1d(x, w4, b, 4, 1).value().rows(), 5u);
}

TEST(NumericTest, DilatedConvMatchesDirectSum) {
  PrecisionScope scope(Precision::kFloat64);
  Rng rng(2);
  const Tensor x = random_tensor({6, 2}, rng);
  const Tensor w = random_tensor({3 * 2, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  Graph g;
  Var y = conv1d(g.constant(x), g.constant(w), g.constant(b), 3, 2);
  // pad = 2; tap j reads position t - 2 + 2j.
  for (int t = 0; t < 6; ++t)
    for (int o = 0; o < 3; ++o) {
      double expect = b.get(o);
      for (int j = 0; j < 3; ++j) {
        int src = t - 2 + 2 * j;
        if (src < 0 || src >= 6) continue;
        for (int c = 0; c < 2; ++c) expect += x.at(src, c) * w.at(j * 2 + c, o);
      }
      EXPECT_NEAR(y.value().at(t, o), expect, 1e-12);
    }
}

TEST(NumericTest, SegmentedConvMatchesSeparateConvs) {
  PrecisionScope scope(Precision::kFloat64);
  Rng rng(4);
  const Tensor x = random_tensor({7, 2}, rng);
  const Tensor w = random_tensor({3 * 2, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const std::vector<Segment> segs{{0, 3}, {3, 7}};
  Graph g;
  Var packed = conv1d(g.constant(x), g.constant(w), g.constant(b), 3, 2, segs);
  Var pooled = max_over_time(packed, segs);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    std::vector<int> idx;
    for (std::size_t r = segs[s].begin; r < segs[s].end; ++r) idx.push_back(static_cast<int>(r));
    Var alone = conv1d(rows(g.constant(x), idx), g.constant(w), g.constant(b), 3, 2);
    Var alone_max = max_over_time(alone);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(packed.value().at(segs[s].begin + r, c), alone.value().at(r, c), 1e-12);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(pooled.value().at(s, c), alone_max.value().at(0, c), 1e-12);
  }
}

TEST(NumericTest, AttentionMatchesComposedPrimitives) {
  PrecisionScope scope(Precision::kFloat64);
  Rng rng(5);
  const Tensor q = random_tensor({5, 4}, rng), k = random_tensor({5, 4}, rng), v = random_tensor({5, 4}, rng);
  const std::vector<Segment> segs{{0, 2}, {2, 5}};
  Graph g;
  Var fused = attention(g.constant(q), g.constant(k), g.constant(v), 2, segs);
  for (const Segment& s : segs) {
    std::vector<int> idx;
    for (std::size_t r = s.begin; r < s.end; ++r) idx.push_back(static_cast<int>(r));
    for (std::size_t h = 0; h < 2; ++h) {
      Var qh = slice_cols(rows(g.constant(q), idx), 2 * h, 2 * h + 2);
      Var kh = slice_cols(rows(g.constant(k), idx), 2 * h, 2 * h + 2);
      Var vh = slice_cols(rows(g.constant(v), idx), 2 * h, 2 * h + 2);
      Var out = matmul(softmax(scale(matmul(qh, kh, true), 1.0 / std::sqrt(2.0))), vh);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < 2; ++c)
          EXPECT_NEAR(fused.value().at(s.begin + r, 2 * h + c), out.value().at(r, c), 1e-12);
    }
  }
}

TEST(NumericTest, LstmMatchesComposedPrimitives) {
  PrecisionScope scope(Precision::kFloat64);
  Rng rng(6);
  const std::size_t hd = 3;
  const Tensor xw = random_tensor({4, 4 * hd}, rng), u = random_tensor({hd, 4 * hd}, rng);
  for (bool reverse : {false, true}) {
    Graph g;
    Var fused = lstm(g.constant(xw), g.constant(u), std::vector<Segment>{{0, 4}}, reverse);
    Var h = g.constant(Tensor({1, hd}, Precision::kFloat64));
    Var c = h;
    for (int step = 0; step < 4; ++step) {
      int r = reverse ? 3 - step : step;
      Var z = add(rows(g.constant(xw), std::vector<int>{r}), matmul(h, g.constant(u)));
      Var i = sigmoid(slice_cols(z, 0, hd)), f = sigmoid(slice_cols(z, hd, 2 * hd));
      Var gg = tanh(slice_cols(z, 2 * hd, 3 * hd)), o = sigmoid(slice_cols(z, 3 * hd, 4 * hd));
      c = add(mul(f, c), mul(i, gg));
      h = mul(o, tanh(c));
      for (std::size_t j = 0; j < hd; ++j)
        EXPECT_NEAR(fused.value().at(static_cast<std::size_t>(r), j), h.value().at(0, j), 1e-12);
    }
  }
}

TEST(NumericTest, GradCheckSumOfSquares) {
  ScalarFn fn = [](Graph&, Var x) { return sum(mul(x, x)); };
  const Tensor p = Tensor::from({3}, {1.0, 2.0, 3.0});
  {
    PrecisionScope scope(Precision::kFloat64);
    Graph g;
    Var x = g.variable(p.converted(Precision::kFloat64));
    g.backward(fn(g, x));
    EXPECT_EQ(g.grad(x)->to_vector(), (std::vector<double>{2.0, 4.0, 6.0}));
  }
  EXPECT_LT(gradient_check(fn, p).max_relative_error, 1e-8);
}

TEST(NumericTest, GradCheckKlAgainstSoftmax) {
  PrecisionScope scope(Precision::kFloat64);
  const Tensor teacher = Tensor::from({1, 2}, {1.0, 0.0});
  ScalarFn fn = [&](Graph&, Var x) { return kl_div(log_softmax(x), teacher); };
  const Tensor point = Tensor::from({1, 2}, {0.0, 0.0});
  Graph g;
  Var x = g.variable(point);
  g.backward(fn(g, x));
  EXPECT_NEAR(g.grad(x)->get(0), -0.5, 1e-15);
  EXPECT_NEAR(g.grad(x)->get(1), 0.5, 1e-15);
  EXPECT_LT(gradient_check(fn, point).max_relative_error, 1e-6);

  // Same objective composed from log(softmax(x)).
  ScalarFn composed = [&](Graph&, Var x) { return kl_div(log(softmax(x)), teacher); };
  EXPECT_LT(gradient_check(composed, point).max_relative_error, 1e-6);
}

TEST(NumericTest, GradCheckConstantFunctionIsZero) {
  ScalarFn fn = [](Graph& g, Var) { return g.constant(Tensor::scalar(4.0, Precision::kFloat64)); };
  const Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5});
  auto r = gradient_check(fn, p);
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_TRUE(r.finite);
}

TEST(NumericTest, GradCheckReportsNonFiniteCoordinate) {
  // Slope overflows to infinity.
  ScalarFn fn = [](Graph&, Var x) { return sum(scale(x, 1e308 * 10)); };
  auto r = gradient_check(fn, Tensor::from({2}, {1.0, 2.0}));
  EXPECT_FALSE(r.finite);
  EXPECT_FALSE(r.passed(1e-4));
  EXPECT_NE(r.message.find("coordinate"), std::string::npos);
}

TEST(NumericTest, EveryPrimitivePassesGradientCheckOnTenSeeds) {
  for (const auto& c : primitive_cases()) {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      const Tensor point = random_tensor(c.shape, rng);
      ScalarFn fn = [&](Graph& g, Var x) {
        Var y = c.build(g, x, seed);
        return y.value().size() == 1 ? y : weighted_sum(g, y, seed + 100);
      };
      auto r = gradient_check(fn, point);
      EXPECT_TRUE(r.passed(1e-4)) << c.name << " seed " << seed << " err " << r.max_relative_error
                                  << " at " << r.worst_index << " " << r.message;
    }
  }
}

TEST(NumericTest, DropoutTrainModeGradient) {
  PrecisionScope scope(Precision::kFloat64);
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Parameter p("x", random_tensor({3, 4}, rng));
    auto objective = [&](Graph& g) {
      Var y = dropout(g.parameter(p), 0.3);
      return weighted_sum(g, y, seed + 100);
    };
    // Train-mode graphs seeded identically draw the same mask.
    Graph base(true, seed);
    p.zero_grad();
    base.backward(objective(base));
    const Tensor analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.get(i);
      p.value.set(i, orig + 1e-5);
      Graph up(true, seed);
      const double fu = objective(up).value().get(0);
      p.value.set(i, orig - 1e-5);
      Graph down(true, seed);
      const double fd = objective(down).value().get(0);
      p.value.set(i, orig);
      const double numeric = (fu - fd) / 2e-5;
      EXPECT_NEAR(analytic.get(i), numeric, 1e-6);
    }
  }
}

TEST(NumericTest, DropoutEvalModeIsIdentity) {
  Rng rng(3);
  Graph g(/*training=*/false);
  Var x = g.constant(random_tensor({4, 4}, rng));
  Var y = dropout(x, 0.5);
  EXPECT_EQ(y.value().to_vector(), x.value().to_vector());
}

TEST(NumericTest, BackwardIsLinearInOutputs) {
  PrecisionScope scope(Precision::kFloat64);
  Rng rng(5);
  const Tensor point = random_tensor({2, 3}, rng);
  auto f1 = [](Var x) { return sum(tanh(x)); };
  auto f2 = [](Var x) { return sum(mul(x, sigmoid(x))); };

  Graph separate;
  Var x = separate.variable(point);
  Var a = f1(x);
  Var b = f2(x);
  separate.backward(a);
  separate.backward(b);

  Graph joint;
  Var z = joint.variable(point);
  joint.backward(add(f1(z), f2(z)));

  auto s = separate.grad(x)->to_vector();
  auto j = joint.grad(z)->to_vector();
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], j[i], 1e-14);
}

TEST(NumericTest, ReusedValueAccumulatesBothContributions) {
  PrecisionScope scope(Precision::kFloat64);
  Graph g;
  Var x = g.variable(Tensor::from({1}, {3.0}));
  g.backward(add(x, x));
  EXPECT_DOUBLE_EQ(g.grad(x)->get(0), 2.0);
}

TEST(NumericTest, BackwardVisitsInReverseConstructionOrder) {
  Graph g;
  Var x = g.variable(Tensor::from({3}, {0.1, 0.2, 0.3}));
  Var y = sum(tanh(scale(sigmoid(x), 2.0)));
  g.backward(y);
  const auto& trace = g.backward_trace();
  ASSERT_EQ(trace.size(), 4u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GT(trace[i - 1], trace[i]);
  EXPECT_EQ(trace.front(), y.id());
}

TEST(NumericTest, ShapeMismatchNamesOperation) {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.op(), "matmul");
  }
  EXPECT_THROW(mul(a, g.constant(Tensor({3, 2}))), ShapeError);
  EXPECT_THROW(embedding(a, std::vector<int>{5}), ShapeError);
}

TEST(NumericTest, ParameterGradientsAccumulateAcrossGraphs) {
  Parameter p("w", Tensor::from({2}, {1.0, -1.0}));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(sum(g.parameter(p)));
  }
  EXPECT_EQ(p.grad.to_vector(), (std::vector<double>{2.0, 2.0}));
}

TEST(NumericTest, LogClampsAtFloor) {
  Graph g;
  Var y = log(g.constant(Tensor::from({2}, {0.0, 1.0}, Precision::kFloat64)));
  EXPECT_NEAR(y.value().get(0), std::log(1e-12), 1e-9);
  EXPECT_EQ(y.value().get(1), 0.0);
}

}  // namespace
}  // namespace xlkd::numeric
