// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/numeric/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "xlkd/common/error.hpp"

namespace xlkd::numeric {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
Eigen::Map<RowMat<T>> as_mat(Tensor& t, std::size_t r, std::size_t c) {
  return Eigen::Map<RowMat<T>>(t.data<T>().data(), static_cast<Eigen::Index>(r),
                               static_cast<Eigen::Index>(c));
}

template <class T>
Eigen::Map<const RowMat<T>> as_mat(const Tensor& t, std::size_t r, std::size_t c) {
  return Eigen::Map<const RowMat<T>>(t.data<T>().data(), static_cast<Eigen::Index>(r),
                                     static_cast<Eigen::Index>(c));
}

Graph& graph_of(std::initializer_list<Var> vs) {
  Graph* g = nullptr;
  for (Var v : vs) {
    if (!v.valid()) throw Error("op applied to an empty Var");
    if (g && v.graph() != g) throw Error("op mixes Vars from different graphs");
    g = v.graph();
  }
  return *g;
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

// Elementwise unary op whose derivative is expressed through its output.
template <class Fwd, class Bwd>
Var unary(const char* name, Var a, Fwd fwd, Bwd bwd) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  Tensor y(x.shape(), x.precision());
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  });
  return g.record(name, std::move(y), {a}, [a, bwd](Graph& g, const Tensor& y, const Tensor& gy) {
    Tensor& gx = g.grad_slot(a);
    const Tensor& x = g.value(a);
    dispatch(y.precision(), [&]<class T>(T) {
      auto xs = x.data<T>();
      auto ys = y.data<T>();
      auto gys = gy.data<T>();
      auto gxs = gx.data<T>();
      for (std::size_t i = 0; i < ys.size(); ++i) gxs[i] += bwd(xs[i], ys[i], gys[i]);
    });
  });
}

enum class Broadcast { kNone, kRow };

Broadcast check_binary(const char* name, const Tensor& a, const Tensor& b, bool allow_row) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.size() == b.size() && a.cols() == b.cols()) return Broadcast::kNone;
  if (allow_row && b.size() == a.cols() && b.rows() == 1) return Broadcast::kRow;
  throw ShapeError(name, "incompatible shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
}

Var add_or_sub(const char* name, Var a, Var b, double sign) {
  Graph& g = graph_of({a, b});
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast mode = check_binary(name, x, z, true);
  Tensor y = x;
  const std::size_t cols = x.cols();
  dispatch(x.precision(), [&]<class T>(T) {
    auto ys = y.data<T>();
    auto zs = z.data<T>();
    const T s = static_cast<T>(sign);
    for (std::size_t i = 0; i < ys.size(); ++i)
      ys[i] += s * zs[mode == Broadcast::kRow ? i % cols : i];
  });
  return g.record(name, std::move(y), {a, b},
                  [a, b, mode, cols, sign](Graph& g, const Tensor& y, const Tensor& gy) {
                    dispatch(y.precision(), [&]<class T>(T) {
                      auto gys = gy.data<T>();
                      if (g.requires_grad(a)) {
                        auto gas = g.grad_slot(a).data<T>();
                        for (std::size_t i = 0; i < gys.size(); ++i) gas[i] += gys[i];
                      }
                      if (g.requires_grad(b)) {
                        auto gbs = g.grad_slot(b).data<T>();
                        const T s = static_cast<T>(sign);
                        for (std::size_t i = 0; i < gys.size(); ++i)
                          gbs[mode == Broadcast::kRow ? i % cols : i] += s * gys[i];
                      }
                    });
                  });
}

}  // namespace

Var matmul(Var a, Var b, bool transpose_b) {
  Graph& g = graph_of({a, b});
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  const std::size_t m = x.rows(), k = x.cols();
  const std::size_t wr = w.rows(), wc = w.cols();
  const std::size_t kb = transpose_b ? wc : wr;
  const std::size_t n = transpose_b ? wr : wc;
  if (k != kb)
    throw ShapeError("matmul", shape_string(x.shape()) + (transpose_b ? " x T" : " x ") +
                                   shape_string(w.shape()));
  Tensor y(matrix_shape(m, n), x.precision());
  dispatch(x.precision(), [&]<class T>(T) {
    auto ym = as_mat<T>(y, m, n);
    auto xm = as_mat<T>(x, m, k);
    auto wm = as_mat<T>(w, wr, wc);
    if (transpose_b)
      ym.noalias() = xm * wm.transpose();
    else
      ym.noalias() = xm * wm;
  });
  return g.record("matmul", std::move(y), {a, b},
                  [a, b, m, k, n, wr, wc, transpose_b](Graph& g, const Tensor& y, const Tensor& gy) {
                    dispatch(y.precision(), [&]<class T>(T) {
                      auto gm = as_mat<T>(gy, m, n);
                      if (g.requires_grad(a)) {
                        auto ga = as_mat<T>(g.grad_slot(a), m, k);
                        auto wm = as_mat<T>(g.value(b), wr, wc);
                        if (transpose_b)
                          ga.noalias() += gm * wm;
                        else
                          ga.noalias() += gm * wm.transpose();
                      }
                      if (g.requires_grad(b)) {
                        auto gb = as_mat<T>(g.grad_slot(b), wr, wc);
                        auto xm = as_mat<T>(g.value(a), m, k);
                        if (transpose_b)
                          gb.noalias() += gm.transpose() * xm;
                        else
                          gb.noalias() += xm.transpose() * gm;
                      }
                    });
                  });
}

Var add(Var a, Var b) { return add_or_sub("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_or_sub("sub", a, b, -1.0); }

Var mul(Var a, Var b) {
  Graph& g = graph_of({a, b});
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  check_binary("mul", x, z, false);
  Tensor y = x;
  dispatch(x.precision(), [&]<class T>(T) {
    auto ys = y.data<T>();
    auto zs = z.data<T>();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] *= zs[i];
  });
  return g.record("mul", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto gys = gy.data<T>();
      auto xs = g.value(a).data<T>();
      auto zs = g.value(b).data<T>();
      if (g.requires_grad(a)) {
        auto gas = g.grad_slot(a).data<T>();
        for (std::size_t i = 0; i < gys.size(); ++i) gas[i] += gys[i] * zs[i];
      }
      if (g.requires_grad(b)) {
        auto gbs = g.grad_slot(b).data<T>();
        for (std::size_t i = 0; i < gys.size(); ++i) gbs[i] += gys[i] * xs[i];
      }
    });
  });
}

namespace {
template <class T>
T clamp_denominator(T v) {
  const T floor = static_cast<T>(kNumericFloor);
  if (std::abs(v) >= floor) return v;
  return v < 0 ? -floor : floor;
}
}  // namespace

Var div(Var a, Var b) {
  Graph& g = graph_of({a, b});
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  check_binary("div", x, z, false);
  Tensor y = x;
  dispatch(x.precision(), [&]<class T>(T) {
    auto ys = y.data<T>();
    auto zs = z.data<T>();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] /= clamp_denominator(zs[i]);
  });
  return g.record("div", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto gys = gy.data<T>();
      auto xs = g.value(a).data<T>();
      auto zs = g.value(b).data<T>();
      if (g.requires_grad(a)) {
        auto gas = g.grad_slot(a).data<T>();
        for (std::size_t i = 0; i < gys.size(); ++i) gas[i] += gys[i] / clamp_denominator(zs[i]);
      }
      if (g.requires_grad(b)) {
        auto gbs = g.grad_slot(b).data<T>();
        const T floor = static_cast<T>(kNumericFloor);
        for (std::size_t i = 0; i < gys.size(); ++i) {
          if (std::abs(zs[i]) < floor) continue;
          gbs[i] -= gys[i] * xs[i] / (zs[i] * zs[i]);
        }
      }
    });
  });
}

Var scale(Var a, double s) {
  return unary(
      "scale", a, [s](auto x) { return static_cast<decltype(x)>(s) * x; },
      [s](auto, auto, auto gy) { return static_cast<decltype(gy)>(s) * gy; });
}

Var embedding(Var table, std::span<const int> ids) {
  Graph& g = graph_of({table});
  const Tensor& t = table.value();
  const std::size_t vocab = t.rows(), dim = t.cols();
  std::vector<int> index(ids.begin(), ids.end());
  for (int id : index)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw ShapeError("embedding", "id " + std::to_string(id) + " outside table of " +
                                        std::to_string(vocab) + " rows");
  Tensor y(matrix_shape(index.size(), dim), t.precision());
  dispatch(t.precision(), [&]<class T>(T) {
    auto ts = t.data<T>();
    auto ys = y.data<T>();
    for (std::size_t r = 0; r < index.size(); ++r)
      std::copy_n(ts.begin() + static_cast<std::ptrdiff_t>(index[r] * dim), dim,
                  ys.begin() + static_cast<std::ptrdiff_t>(r * dim));
  });
  return g.record("embedding", std::move(y), {table},
                  [table, index = std::move(index), dim](Graph& g, const Tensor& y, const Tensor& gy) {
                    dispatch(y.precision(), [&]<class T>(T) {
                      auto gts = g.grad_slot(table).data<T>();
                      auto gys = gy.data<T>();
                      for (std::size_t r = 0; r < index.size(); ++r) {
                        T* dst = gts.data() + index[r] * dim;
                        const T* src = gys.data() + r * dim;
                        for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
                      }
                    });
                  });
}

Var softmax(Var a) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  Tensor y(x.shape(), x.precision());
  const std::size_t rows = x.rows(), cols = x.cols();
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = xs.data() + r * cols;
      T* yr = ys.data() + r * cols;
      const T mx = *std::max_element(xr, xr + cols);
      T total = 0;
      for (std::size_t c = 0; c < cols; ++c) total += (yr[c] = std::exp(xr[c] - mx));
      for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
    }
  });
  return g.record("softmax", std::move(y), {a}, [a, rows, cols](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto ys = y.data<T>();
      auto gys = gy.data<T>();
      auto gxs = g.grad_slot(a).data<T>();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        T dot = 0;
        for (std::size_t c = 0; c < cols; ++c) dot += gys[o + c] * ys[o + c];
        for (std::size_t c = 0; c < cols; ++c) gxs[o + c] += ys[o + c] * (gys[o + c] - dot);
      }
    });
  });
}

Var log_softmax(Var a) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  Tensor y(x.shape(), x.precision());
  const std::size_t rows = x.rows(), cols = x.cols();
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = xs.data() + r * cols;
      T* yr = ys.data() + r * cols;
      const T mx = *std::max_element(xr, xr + cols);
      T total = 0;
      for (std::size_t c = 0; c < cols; ++c) total += std::exp(xr[c] - mx);
      const T lse = mx + std::log(total);
      for (std::size_t c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
    }
  });
  return g.record("log_softmax", std::move(y), {a}, [a, rows, cols](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto ys = y.data<T>();
      auto gys = gy.data<T>();
      auto gxs = g.grad_slot(a).data<T>();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        T total = 0;
        for (std::size_t c = 0; c < cols; ++c) total += gys[o + c];
        for (std::size_t c = 0; c < cols; ++c) gxs[o + c] += gys[o + c] - std::exp(ys[o + c]) * total;
      }
    });
  });
}

Var log(Var a) {
  return unary(
      "log", a,
      [](auto x) {
        using T = decltype(x);
        return std::log(std::max(x, static_cast<T>(kNumericFloor)));
      },
      [](auto x, auto, auto gy) {
        using T = decltype(x);
        return x > static_cast<T>(kNumericFloor) ? gy / x : T(0);
      });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](auto x) {
        using T = decltype(x);
        return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
      },
      [](auto, auto y, auto gy) { return gy * y * (decltype(y)(1) - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](auto x) { return std::tanh(x); },
      [](auto, auto y, auto gy) { return gy * (decltype(y)(1) - y * y); });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](auto x) { return x > 0 ? x : decltype(x)(0); },
      [](auto x, auto, auto gy) { return x > 0 ? gy : decltype(gy)(0); });
}

namespace {

// Per-row [lo, hi) bounds of the enclosing segment.
void segment_bounds(Segments segments, std::size_t rows, std::vector<std::size_t>& lo, std::vector<std::size_t>& hi,
                    const char* op) {
  lo.assign(rows, 0);
  hi.assign(rows, rows);
  if (segments.empty()) return;
  std::size_t covered = 0;
  for (const Segment& s : segments) {
    if (s.begin != covered || s.end <= s.begin || s.end > rows)
      throw ShapeError(op, "segments must tile the rows in order");
    for (std::size_t r = s.begin; r < s.end; ++r) {
      lo[r] = s.begin;
      hi[r] = s.end;
    }
    covered = s.end;
  }
  if (covered != rows) throw ShapeError(op, "segments cover " + std::to_string(covered) + " of " + std::to_string(rows) + " rows");
}

std::vector<Segment> whole_or(Segments segments, std::size_t rows) {
  if (!segments.empty()) return {segments.begin(), segments.end()};
  return {Segment{0, rows}};
}

}  // namespace

Var conv1d(Var x, Var weight, Var bias, int kernel, int dilation, Segments segments) {
  Graph& g = graph_of({x, weight, bias});
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  if (kernel < 1 || dilation < 1) throw ShapeError("conv1d", "kernel and dilation must be positive");
  const std::size_t len = in.rows(), cin = in.cols();
  const std::size_t k = static_cast<std::size_t>(kernel);
  const std::size_t cout = w.cols();
  if (w.rows() != k * cin)
    throw ShapeError("conv1d", "weight " + shape_string(w.shape()) + " does not match kernel " +
                                   std::to_string(kernel) + " over " + std::to_string(cin) + " channels");
  if (b.size() != cout) throw ShapeError("conv1d", "bias " + shape_string(b.shape()));
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(dilation * (kernel - 1) / 2);
  std::vector<std::size_t> lo, hi;
  segment_bounds(segments, len, lo, hi, "conv1d");

  // im2col: row t holds the dilated window around t, zero outside its segment.
  std::vector<std::ptrdiff_t> src_of(len * k, -1);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) - pad + static_cast<std::ptrdiff_t>(j) * dilation;
      if (src >= static_cast<std::ptrdiff_t>(lo[t]) && src < static_cast<std::ptrdiff_t>(hi[t])) src_of[t * k + j] = src;
    }
  Tensor patches(matrix_shape(len, k * cin), in.precision());
  Tensor y(matrix_shape(len, cout), in.precision());
  dispatch(in.precision(), [&]<class T>(T) {
    auto xs = in.data<T>();
    auto ps = patches.data<T>();
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = src_of[t * k + j];
        if (src < 0) continue;
        std::copy_n(xs.begin() + src * static_cast<std::ptrdiff_t>(cin), cin,
                    ps.begin() + static_cast<std::ptrdiff_t>(t * k * cin + j * cin));
      }
    auto ym = as_mat<T>(y, len, cout);
    ym.noalias() = as_mat<T>(patches, len, k * cin) * as_mat<T>(w, k * cin, cout);
    auto bs = b.data<T>();
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < cout; ++c) ym(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) += bs[c];
  });
  return g.record(
      "conv1d", std::move(y), {x, weight, bias},
      [x, weight, bias, patches = std::move(patches), src_of = std::move(src_of), len, cin, k, cout](
          Graph& g, const Tensor& y, const Tensor& gy) {
        dispatch(y.precision(), [&]<class T>(T) {
          auto gm = as_mat<T>(gy, len, cout);
          if (g.requires_grad(weight))
            as_mat<T>(g.grad_slot(weight), k * cin, cout).noalias() +=
                as_mat<T>(patches, len, k * cin).transpose() * gm;
          if (g.requires_grad(bias)) {
            auto gbs = g.grad_slot(bias).data<T>();
            auto gys = gy.data<T>();
            for (std::size_t t = 0; t < len; ++t)
              for (std::size_t c = 0; c < cout; ++c) gbs[c] += gys[t * cout + c];
          }
          if (g.requires_grad(x)) {
            RowMat<T> gp = gm * as_mat<T>(g.value(weight), k * cin, cout).transpose();
            auto gxs = g.grad_slot(x).data<T>();
            for (std::size_t t = 0; t < len; ++t)
              for (std::size_t j = 0; j < k; ++j) {
                const std::ptrdiff_t src = src_of[t * k + j];
                if (src < 0) continue;
                for (std::size_t c = 0; c < cin; ++c)
                  gxs[static_cast<std::size_t>(src) * cin + c] +=
                      gp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j * cin + c));
              }
          }
        });
      });
}

Var max_over_time(Var a, Segments segments) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (rows == 0) throw ShapeError("max_over_time", "empty sequence");
  std::vector<std::size_t> lo, hi;
  segment_bounds(segments, rows, lo, hi, "max_over_time");
  const std::vector<Segment> segs = whole_or(segments, rows);
  Tensor y(matrix_shape(segs.size(), cols), x.precision());
  std::vector<std::size_t> arg(segs.size() * cols, 0);
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (std::size_t s = 0; s < segs.size(); ++s)
      for (std::size_t c = 0; c < cols; ++c) {
        std::size_t best_r = segs[s].begin;
        T best = xs[best_r * cols + c];
        for (std::size_t r = segs[s].begin + 1; r < segs[s].end; ++r)
          if (xs[r * cols + c] > best) {
            best = xs[r * cols + c];
            best_r = r;
          }
        ys[s * cols + c] = best;
        arg[s * cols + c] = best_r;
      }
  });
  return g.record("max_over_time", std::move(y), {a},
                  [a, arg = std::move(arg), cols](Graph& g, const Tensor& y, const Tensor& gy) {
                    dispatch(y.precision(), [&]<class T>(T) {
                      auto gxs = g.grad_slot(a).data<T>();
                      auto gys = gy.data<T>();
                      for (std::size_t i = 0; i < arg.size(); ++i) gxs[arg[i] * cols + i % cols] += gys[i];
                    });
                  });
}

Var attention(Var q, Var k, Var v, int heads, Segments segments) {
  Graph& g = graph_of({q, k, v});
  const Tensor& qt = q.value();
  const std::size_t rows = qt.rows(), d = qt.cols();
  if (k.value().rows() != rows || v.value().rows() != rows || k.value().cols() != d || v.value().cols() != d)
    throw ShapeError("attention", "q, k, v shapes differ");
  if (heads < 1 || d % static_cast<std::size_t>(heads) != 0)
    throw ShapeError("attention", std::to_string(d) + " columns do not split into " + std::to_string(heads) + " heads");
  std::vector<std::size_t> lo, hi;
  segment_bounds(segments, rows, lo, hi, "attention");
  const std::vector<Segment> segs = whole_or(segments, rows);
  const std::size_t nh = static_cast<std::size_t>(heads), dh = d / nh;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // Attention weights for every (segment, head), row-major L x L, kept for backward.
  std::vector<std::size_t> offset(segs.size() * nh + 1, 0);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const std::size_t len = segs[s].end - segs[s].begin;
    for (std::size_t h = 0; h < nh; ++h) offset[s * nh + h + 1] = offset[s * nh + h] + len * len;
  }
  Tensor weights({offset.back()}, qt.precision());
  Tensor y(matrix_shape(rows, d), qt.precision());
  dispatch(qt.precision(), [&]<class T>(T) {
    auto Q = as_mat<T>(qt, rows, d);
    auto K = as_mat<T>(k.value(), rows, d);
    auto V = as_mat<T>(v.value(), rows, d);
    auto Y = as_mat<T>(y, rows, d);
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const auto b = static_cast<Eigen::Index>(segs[s].begin);
      const auto len = static_cast<Eigen::Index>(segs[s].end - segs[s].begin);
      for (std::size_t h = 0; h < nh; ++h) {
        const auto c = static_cast<Eigen::Index>(h * dh), w = static_cast<Eigen::Index>(dh);
        Eigen::Map<RowMat<T>> A(weights.data<T>().data() + offset[s * nh + h], len, len);
        A.noalias() = Q.block(b, c, len, w) * K.block(b, c, len, w).transpose();
        A *= static_cast<T>(inv_sqrt);
        for (Eigen::Index r = 0; r < len; ++r) {
          const T m = A.row(r).maxCoeff();
          A.row(r) = (A.row(r).array() - m).exp();
          A.row(r) /= A.row(r).sum();
        }
        Y.block(b, c, len, w).noalias() = A * V.block(b, c, len, w);
      }
    }
  });
  return g.record(
      "attention", std::move(y), {q, k, v},
      [q, k, v, segs, offset = std::move(offset), weights = std::move(weights), rows, d, nh, dh, inv_sqrt](
          Graph& g, const Tensor& y, const Tensor& gy) {
        dispatch(y.precision(), [&]<class T>(T) {
          auto Q = as_mat<T>(g.value(q), rows, d);
          auto K = as_mat<T>(g.value(k), rows, d);
          auto V = as_mat<T>(g.value(v), rows, d);
          auto GY = as_mat<T>(gy, rows, d);
          RowMat<T> GQ = RowMat<T>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
          RowMat<T> GK = GQ, GV = GQ;
          for (std::size_t s = 0; s < segs.size(); ++s) {
            const auto b = static_cast<Eigen::Index>(segs[s].begin);
            const auto len = static_cast<Eigen::Index>(segs[s].end - segs[s].begin);
            for (std::size_t h = 0; h < nh; ++h) {
              const auto c = static_cast<Eigen::Index>(h * dh), w = static_cast<Eigen::Index>(dh);
              Eigen::Map<const RowMat<T>> A(weights.data<T>().data() + offset[s * nh + h], len, len);
              auto dO = GY.block(b, c, len, w);
              GV.block(b, c, len, w).noalias() += A.transpose() * dO;
              RowMat<T> dA = dO * V.block(b, c, len, w).transpose();
              RowMat<T> dS = A.array() * (dA.colwise() - (dA.array() * A.array()).rowwise().sum().matrix()).array();
              dS *= static_cast<T>(inv_sqrt);
              GQ.block(b, c, len, w).noalias() += dS * K.block(b, c, len, w);
              GK.block(b, c, len, w).noalias() += dS.transpose() * Q.block(b, c, len, w);
            }
          }
          if (g.requires_grad(q)) as_mat<T>(g.grad_slot(q), rows, d) += GQ;
          if (g.requires_grad(k)) as_mat<T>(g.grad_slot(k), rows, d) += GK;
          if (g.requires_grad(v)) as_mat<T>(g.grad_slot(v), rows, d) += GV;
        });
      });
}

Var lstm(Var xw, Var u, Segments segments, bool reverse) {
  Graph& g = graph_of({xw, u});
  const Tensor& x = xw.value();
  const std::size_t rows = x.rows(), h4 = x.cols(), hd = u.value().rows();
  if (u.value().cols() != h4 || h4 != 4 * hd)
    throw ShapeError("lstm", "projection " + shape_string(x.shape()) + " vs recurrent " + shape_string(u.value().shape()));
  std::vector<std::size_t> lo, hi;
  segment_bounds(segments, rows, lo, hi, "lstm");
  const std::vector<Segment> segs = whole_or(segments, rows);
  // Per row: activated gates (i, f, g, o) and the cell state.
  Tensor gates(matrix_shape(rows, h4), x.precision());
  Tensor cells(matrix_shape(rows, hd), x.precision());
  Tensor y(matrix_shape(rows, hd), x.precision());
  dispatch(x.precision(), [&]<class T>(T) {
    auto X = as_mat<T>(x, rows, h4);
    auto U = as_mat<T>(u.value(), hd, h4);
    auto G = as_mat<T>(gates, rows, h4);
    auto C = as_mat<T>(cells, rows, hd);
    auto Y = as_mat<T>(y, rows, hd);
    const auto H = static_cast<Eigen::Index>(hd);
    for (const Segment& s : segs) {
      Eigen::Matrix<T, 1, Eigen::Dynamic> hprev = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(H);
      Eigen::Matrix<T, 1, Eigen::Dynamic> cprev = hprev;
      for (std::size_t step = 0; step < s.end - s.begin; ++step) {
        const auto r = static_cast<Eigen::Index>(reverse ? s.end - 1 - step : s.begin + step);
        Eigen::Matrix<T, 1, Eigen::Dynamic> z = X.row(r) + hprev * U;
        for (Eigen::Index j = 0; j < 4 * H; ++j) {
          const bool is_g = j >= 2 * H && j < 3 * H;
          z(j) = is_g ? std::tanh(z(j)) : T(1) / (T(1) + std::exp(-z(j)));
        }
        G.row(r) = z;
        cprev = z.segment(H, H).cwiseProduct(cprev) + z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
        C.row(r) = cprev;
        hprev = z.segment(3 * H, H).cwiseProduct(cprev.array().tanh().matrix());
        Y.row(r) = hprev;
      }
    }
  });
  return g.record(
      "lstm", std::move(y), {xw, u},
      [xw, u, segs, gates = std::move(gates), cells = std::move(cells), rows, hd, h4, reverse](
          Graph& g, const Tensor& y, const Tensor& gy) {
        dispatch(y.precision(), [&]<class T>(T) {
          auto U = as_mat<T>(g.value(u), hd, h4);
          auto G = as_mat<T>(gates, rows, h4);
          auto C = as_mat<T>(cells, rows, hd);
          auto Y = as_mat<T>(y, rows, hd);
          auto GY = as_mat<T>(gy, rows, hd);
          const auto H = static_cast<Eigen::Index>(hd);
          RowMat<T> GX(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(h4));
          RowMat<T> GU = RowMat<T>::Zero(H, 4 * H);
          using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
          for (const Segment& s : segs) {
            const std::size_t len = s.end - s.begin;
            RowVec dh_next = RowVec::Zero(H), dc_next = RowVec::Zero(H);
            for (std::size_t step = len; step-- > 0;) {
              const auto r = static_cast<Eigen::Index>(reverse ? s.end - 1 - step : s.begin + step);
              const bool first = step == 0;
              const auto rp = static_cast<Eigen::Index>(reverse ? r + 1 : r - 1);
              RowVec cprev = first ? RowVec::Zero(H) : RowVec(C.row(rp));
              RowVec hprev = first ? RowVec::Zero(H) : RowVec(Y.row(rp));
              auto gi = G.row(r).segment(0, H), gf = G.row(r).segment(H, H);
              auto gg = G.row(r).segment(2 * H, H), go = G.row(r).segment(3 * H, H);
              RowVec tc = C.row(r).array().tanh();
              RowVec dh = GY.row(r) + dh_next;
              RowVec dc = dh.cwiseProduct(go).cwiseProduct((T(1) - tc.array().square()).matrix()) + dc_next;
              RowVec dz(4 * H);
              dz.segment(0, H) = (dc.array() * gg.array() * gi.array() * (T(1) - gi.array())).matrix();
              dz.segment(H, H) = (dc.array() * cprev.array() * gf.array() * (T(1) - gf.array())).matrix();
              dz.segment(2 * H, H) = (dc.array() * gi.array() * (T(1) - gg.array().square())).matrix();
              dz.segment(3 * H, H) = (dh.array() * tc.array() * go.array() * (T(1) - go.array())).matrix();
              GX.row(r) = dz;
              GU.noalias() += hprev.transpose() * dz;
              dh_next = dz * U.transpose();
              dc_next = dc.cwiseProduct(gf);
            }
          }
          if (g.requires_grad(xw)) as_mat<T>(g.grad_slot(xw), rows, h4) += GX;
          if (g.requires_grad(u)) as_mat<T>(g.grad_slot(u), hd, h4) += GU;
        });
      });
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat", "no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat", "axis must be 0 or 1");
  Graph& g = *xs.front().graph();
  const Precision p = xs.front().value().precision();
  std::vector<std::size_t> extents;
  std::size_t rows = 0, cols = 0;
  for (Var v : xs) {
    if (v.graph() != &g) throw Error("concat mixes Vars from different graphs");
    const Tensor& t = v.value();
    if (axis == 0) {
      if (cols == 0) cols = t.cols();
      if (t.cols() != cols) throw ShapeError("concat", "column mismatch on axis 0");
      extents.push_back(t.rows());
      rows += t.rows();
    } else {
      if (rows == 0) rows = t.rows();
      if (t.rows() != rows) throw ShapeError("concat", "row mismatch on axis 1");
      extents.push_back(t.cols());
      cols += t.cols();
    }
  }
  Tensor y(matrix_shape(rows, cols), p);
  dispatch(p, [&]<class T>(T) {
    auto ys = y.data<T>();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto src = xs[i].value().data<T>();
      if (axis == 0) {
        std::copy(src.begin(), src.end(), ys.begin() + static_cast<std::ptrdiff_t>(offset * cols));
      } else {
        const std::size_t w = extents[i];
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                      ys.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
      }
      offset += extents[i];
    }
  });
  return g.record("concat", std::move(y), xs,
                  [xs, extents, axis, rows, cols](Graph& g, const Tensor& y, const Tensor& gy) {
                    dispatch(y.precision(), [&]<class T>(T) {
                      auto gys = gy.data<T>();
                      std::size_t offset = 0;
                      for (std::size_t i = 0; i < xs.size(); ++i) {
                        const std::size_t w = extents[i];
                        if (g.requires_grad(xs[i])) {
                          auto gxs = g.grad_slot(xs[i]).data<T>();
                          if (axis == 0) {
                            for (std::size_t j = 0; j < w * cols; ++j) gxs[j] += gys[offset * cols + j];
                          } else {
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < w; ++c) gxs[r * w + c] += gys[r * cols + offset + c];
                          }
                        }
                        offset += w;
                      }
                    });
                  });
}

Var rows(Var a, std::span<const int> index) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  const std::size_t n = x.rows(), cols = x.cols();
  std::vector<int> idx(index.begin(), index.end());
  for (int i : idx)
    if (i < 0 || static_cast<std::size_t>(i) >= n)
      throw ShapeError("rows", "index " + std::to_string(i) + " outside " + std::to_string(n) + " rows");
  Tensor y(matrix_shape(idx.size(), cols), x.precision());
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (std::size_t r = 0; r < idx.size(); ++r)
      std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(idx[r] * cols), cols,
                  ys.begin() + static_cast<std::ptrdiff_t>(r * cols));
  });
  return g.record("rows", std::move(y), {a}, [a, idx = std::move(idx), cols](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto gxs = g.grad_slot(a).data<T>();
      auto gys = gy.data<T>();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) gxs[idx[r] * cols + c] += gys[r * cols + c];
    });
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (begin >= end || end > cols)
    throw ShapeError("slice_cols", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                       ") outside " + std::to_string(cols) + " columns");
  const std::size_t w = end - begin;
  Tensor y(matrix_shape(rows, w), x.precision());
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(r * cols + begin), w,
                  ys.begin() + static_cast<std::ptrdiff_t>(r * w));
  });
  return g.record("slice_cols", std::move(y), {a}, [a, rows, cols, begin, w](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto gxs = g.grad_slot(a).data<T>();
      auto gys = gy.data<T>();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) gxs[r * cols + begin + c] += gys[r * w + c];
    });
  });
}

Var sum(Var a) {
  Graph& g = graph_of({a});
  const Tensor& x = a.value();
  Tensor y({1}, x.precision());
  dispatch(x.precision(), [&]<class T>(T) {
    T total = 0;
    for (T v : x.data<T>()) total += v;
    y.data<T>()[0] = total;
  });
  return g.record("sum", std::move(y), {a}, [a](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      const T gv = gy.data<T>()[0];
      for (T& v : g.grad_slot(a).data<T>()) v += gv;
    });
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  Graph& g = graph_of({a, gain, bias});
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.value().size() != cols || bias.value().size() != cols)
    throw ShapeError("layer_norm", "gain/bias width does not match " + shape_string(x.shape()));
  Tensor y(x.shape(), x.precision());
  Tensor xhat(x.shape(), x.precision());
  std::vector<double> inv_std(rows);
  dispatch(x.precision(), [&]<class T>(T) {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    auto hs = xhat.data<T>();
    auto gs = gain.value().data<T>();
    auto bs = bias.value().data<T>();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = xs.data() + r * cols;
      T mu = 0;
      for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
      mu /= static_cast<T>(cols);
      T var = 0;
      for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
      var /= static_cast<T>(cols);
      const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
      inv_std[r] = static_cast<double>(is);
      for (std::size_t c = 0; c < cols; ++c) {
        hs[r * cols + c] = (xr[c] - mu) * is;
        ys[r * cols + c] = hs[r * cols + c] * gs[c] + bs[c];
      }
    }
  });
  return g.record(
      "layer_norm", std::move(y), {a, gain, bias},
      [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, cols](
          Graph& g, const Tensor& y, const Tensor& gy) {
        dispatch(y.precision(), [&]<class T>(T) {
          auto gys = gy.data<T>();
          auto hs = xhat.data<T>();
          auto gs = g.value(gain).data<T>();
          if (g.requires_grad(gain)) {
            auto gg = g.grad_slot(gain).data<T>();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < cols; ++c) gg[c] += gys[r * cols + c] * hs[r * cols + c];
          }
          if (g.requires_grad(bias)) {
            auto gb = g.grad_slot(bias).data<T>();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < cols; ++c) gb[c] += gys[r * cols + c];
          }
          if (g.requires_grad(a)) {
            auto gxs = g.grad_slot(a).data<T>();
            const T n = static_cast<T>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
              T s1 = 0, s2 = 0;
              for (std::size_t c = 0; c < cols; ++c) {
                const T dh = gys[r * cols + c] * gs[c];
                s1 += dh;
                s2 += dh * hs[r * cols + c];
              }
              const T is = static_cast<T>(inv_std[r]);
              for (std::size_t c = 0; c < cols; ++c) {
                const T dh = gys[r * cols + c] * gs[c];
                gxs[r * cols + c] += is / n * (n * dh - s1 - hs[r * cols + c] * s2);
              }
            }
          }
        });
      });
}

Var dropout(Var a, double rate) {
  Graph& g = graph_of({a});
  if (!g.training() || rate <= 0.0) return a;
  if (rate >= 1.0) throw ShapeError("dropout", "rate must be below 1");
  const Tensor& x = a.value();
  Tensor mask(x.shape(), x.precision());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.set(i, uniform01(g.rng()) >= rate ? keep_scale : 0.0);
  Tensor y = x;
  dispatch(x.precision(), [&]<class T>(T) {
    auto ys = y.data<T>();
    auto ms = mask.data<T>();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] *= ms[i];
  });
  return g.record("dropout", std::move(y), {a}, [a, mask = std::move(mask)](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      auto gxs = g.grad_slot(a).data<T>();
      auto gys = gy.data<T>();
      auto ms = mask.data<T>();
      for (std::size_t i = 0; i < gys.size(); ++i) gxs[i] += gys[i] * ms[i];
    });
  });
}

Var kl_div(Var student_log_probs, const Tensor& teacher_probs) {
  Graph& g = graph_of({student_log_probs});
  const Tensor& s = student_log_probs.value();
  if (s.size() != teacher_probs.size() || s.cols() != teacher_probs.cols())
    throw ShapeError("kl_div", "student " + shape_string(s.shape()) + " vs teacher " +
                                   shape_string(teacher_probs.shape()));
  Tensor t = teacher_probs.converted(s.precision());
  Tensor y({1}, s.precision());
  const double log_floor = std::log(kNumericFloor);
  dispatch(s.precision(), [&]<class T>(T) {
    auto ss = s.data<T>();
    auto ts = t.data<T>();
    T total = 0;
    for (std::size_t i = 0; i < ss.size(); ++i) {
      if (ts[i] <= 0) continue;
      const T ls = std::max(ss[i], static_cast<T>(log_floor));
      total += ts[i] * (std::log(ts[i]) - ls);
    }
    y.data<T>()[0] = total;
  });
  return g.record("kl_div", std::move(y), {student_log_probs},
                  [student_log_probs, t = std::move(t), log_floor](Graph& g, const Tensor& y, const Tensor& gy) {
                    dispatch(y.precision(), [&]<class T>(T) {
                      const T gv = gy.data<T>()[0];
                      auto ss = g.value(student_log_probs).data<T>();
                      auto ts = t.data<T>();
                      auto gs = g.grad_slot(student_log_probs).data<T>();
                      for (std::size_t i = 0; i < ss.size(); ++i)
                        if (ss[i] > static_cast<T>(log_floor)) gs[i] -= gv * ts[i];
                    });
                  });
}

Var nll(Var log_probs, std::span<const int> targets) {
  Graph& g = graph_of({log_probs});
  const Tensor& s = log_probs.value();
  const std::size_t rows = s.rows(), cols = s.cols();
  if (targets.size() != rows)
    throw ShapeError("nll", std::to_string(targets.size()) + " targets for " + std::to_string(rows) + " rows");
  std::vector<int> tgt(targets.begin(), targets.end());
  for (int t : tgt)
    if (t < 0 || static_cast<std::size_t>(t) >= cols) throw ShapeError("nll", "target outside category range");
  Tensor y({1}, s.precision());
  dispatch(s.precision(), [&]<class T>(T) {
    auto ss = s.data<T>();
    T total = 0;
    for (std::size_t r = 0; r < rows; ++r) total -= ss[r * cols + static_cast<std::size_t>(tgt[r])];
    y.data<T>()[0] = total;
  });
  return g.record("nll", std::move(y), {log_probs}, [log_probs, tgt = std::move(tgt), cols](Graph& g, const Tensor& y, const Tensor& gy) {
    dispatch(y.precision(), [&]<class T>(T) {
      const T gv = gy.data<T>()[0];
      auto gs = g.grad_slot(log_probs).data<T>();
      for (std::size_t r = 0; r < tgt.size(); ++r) gs[r * cols + static_cast<std::size_t>(tgt[r])] -= gv;
    });
  });
}

}  // namespace xlkd::numeric
