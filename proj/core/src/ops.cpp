#include "dims/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dims {

namespace {

enum class Broadcast { kSame, kScalarA, kScalarB };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalarB;
  if (a.size() == 1) return Broadcast::kScalarA;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

// Accumulates `g` (output-shaped) into an input grad that may be a broadcast scalar.
void accumulate(std::span<Real> dst, std::span<const Real> g, bool scalar) {
  if (dst.empty()) return;
  if (scalar) {
    Real total = 0;
    for (auto v : g) total += v;
    dst[0] += total;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return Tensor::op_result(x.shape(), std::move(out), {x}, [df](const GradContext& ctx) {
    auto gx = ctx.input_grad(0);
    if (gx.empty()) return;
    auto xv = ctx.inputs[0].values();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += ctx.out_grad[i] * df(xv[i], ctx.out_value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  auto kind = broadcast_kind(a, b, "add");
  const auto& big = kind == Broadcast::kScalarA ? b : a;
  auto av = a.values();
  auto bv = b.values();
  std::vector<Real> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[kind == Broadcast::kScalarA ? 0 : i] + bv[kind == Broadcast::kScalarB ? 0 : i];
  }
  return Tensor::op_result(big.shape(), std::move(out), {a, b}, [kind](const GradContext& ctx) {
    accumulate(ctx.input_grad(0), ctx.out_grad, kind == Broadcast::kScalarA);
    accumulate(ctx.input_grad(1), ctx.out_grad, kind == Broadcast::kScalarB);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto kind = broadcast_kind(a, b, "sub");
  const auto& big = kind == Broadcast::kScalarA ? b : a;
  auto av = a.values();
  auto bv = b.values();
  std::vector<Real> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[kind == Broadcast::kScalarA ? 0 : i] - bv[kind == Broadcast::kScalarB ? 0 : i];
  }
  return Tensor::op_result(big.shape(), std::move(out), {a, b}, [kind](const GradContext& ctx) {
    accumulate(ctx.input_grad(0), ctx.out_grad, kind == Broadcast::kScalarA);
    auto gb = ctx.input_grad(1);
    if (gb.empty()) return;
    std::vector<Real> neg(ctx.out_grad.begin(), ctx.out_grad.end());
    for (auto& v : neg) v = -v;
    accumulate(gb, neg, kind == Broadcast::kScalarB);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto kind = broadcast_kind(a, b, "mul");
  const auto& big = kind == Broadcast::kScalarA ? b : a;
  auto av = a.values();
  auto bv = b.values();
  std::vector<Real> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[kind == Broadcast::kScalarA ? 0 : i] * bv[kind == Broadcast::kScalarB ? 0 : i];
  }
  return Tensor::op_result(big.shape(), std::move(out), {a, b}, [kind](const GradContext& ctx) {
    auto av = ctx.inputs[0].values();
    auto bv = ctx.inputs[1].values();
    auto n = ctx.out_grad.size();
    if (auto ga = ctx.input_grad(0); !ga.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        ga[kind == Broadcast::kScalarA ? 0 : i] +=
            ctx.out_grad[i] * bv[kind == Broadcast::kScalarB ? 0 : i];
      }
    }
    if (auto gb = ctx.input_grad(1); !gb.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        gb[kind == Broadcast::kScalarB ? 0 : i] +=
            ctx.out_grad[i] * av[kind == Broadcast::kScalarA ? 0 : i];
      }
    }
  });
}

Tensor affine(const Tensor& x, Real scale, Real shift) {
  return unary(
      x, [scale, shift](Real v) { return scale * v + shift; },
      [scale](Real, Real) { return scale; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](Real v) {
        if (v >= 0) return Real{1} / (Real{1} + std::exp(-v));
        Real e = std::exp(v);
        return e / (Real{1} + e);
      },
      [](Real, Real y) { return y * (Real{1} - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](Real v) { return std::tanh(v); }, [](Real, Real y) { return Real{1} - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](Real v) { return v > 0 ? v : Real{0}; },
      [](Real v, Real) { return v > 0 ? Real{1} : Real{0}; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

Tensor log_floor(const Tensor& x, Real floor) {
  return unary(
      x, [floor](Real v) { return std::log(std::max(v, floor)); },
      [floor](Real v, Real) { return v > floor ? Real{1} / v : Real{0}; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  auto av = a.values();
  auto bv = b.values();
  std::vector<Real> out(m * n, Real{0});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real s = av[i * k + p];
      if (s == Real{0}) continue;
      const Real* brow = &bv[p * n];
      Real* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  return Tensor::op_result({m, n}, std::move(out), {a, b}, [m, k, n](const GradContext& ctx) {
    auto av = ctx.inputs[0].values();
    auto bv = ctx.inputs[1].values();
    auto go = ctx.out_grad;
    if (auto ga = ctx.input_grad(0); !ga.empty()) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (auto gb = ctx.input_grad(1); !gb.empty()) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const Real s = av[i * k + p];
          if (s == Real{0}) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * go[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return Tensor::op_result({n, m}, std::move(out), {a}, [m, n](const GradContext& ctx) {
    auto ga = ctx.input_grad(0);
    if (ga.empty()) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += ctx.out_grad[j * m + i];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  auto s = split_axis(x.shape(), axis, "softmax");
  auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      Real mx = xv[base];
      for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      Real total = 0;
      for (std::size_t k = 0; k < s.len; ++k) {
        Real e = std::exp(xv[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.len; ++k) out[base + k * s.inner] /= total;
    }
  }
  return Tensor::op_result(x.shape(), std::move(out), {x}, [s](const GradContext& ctx) {
    auto gx = ctx.input_grad(0);
    if (gx.empty()) return;
    const auto& y = ctx.out_value;
    const auto& go = ctx.out_grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        Real dot = 0;
        for (std::size_t k = 0; k < s.len; ++k) {
          dot += go[base + k * s.inner] * y[base + k * s.inner];
        }
        for (std::size_t k = 0; k < s.len; ++k) {
          const auto idx = base + k * s.inner;
          gx[idx] += y[idx] * (go[idx] - dot);
        }
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const auto& first = parts.front().shape();
  auto base = split_axis(first, axis, "concat");
  std::vector<std::size_t> lens;
  std::size_t total_len = 0;
  for (const auto& p : parts) {
    const auto& sh = p.shape();
    if (sh.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < sh.size(); ++i) {
      if (i != axis && sh[i] != first[i]) {
        throw DimensionError("concat: non-axis dimensions differ: " + shape_str(first) + " vs " +
                             shape_str(sh));
      }
    }
    lens.push_back(sh[axis]);
    total_len += sh[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_len;
  std::vector<Real> out(shape_size(out_shape));
  const std::size_t out_stride = total_len * base.inner;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    const std::size_t chunk = lens[k] * base.inner;
    for (std::size_t o = 0; o < base.outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_stride + offset));
    }
    offset += chunk;
  }
  const auto outer = base.outer, inner = base.inner;
  return Tensor::op_result(
      std::move(out_shape), std::move(out), parts,
      [lens, outer, inner, out_stride](const GradContext& ctx) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < lens.size(); ++k) {
          const std::size_t chunk = lens[k] * inner;
          if (auto g = ctx.input_grad(k); !g.empty()) {
            for (std::size_t o = 0; o < outer; ++o) {
              for (std::size_t i = 0; i < chunk; ++i) {
                g[o * chunk + i] += ctx.out_grad[o * out_stride + offset + i];
              }
            }
          }
          offset += chunk;
        }
      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  auto s = split_axis(x.shape(), axis, "slice");
  if (begin >= end || end > s.len) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis of length " + std::to_string(s.len));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  const std::size_t stride = s.len * s.inner;
  const std::size_t start = begin * s.inner;
  auto xv = x.values();
  std::vector<Real> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * stride + start), chunk,
                out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  }
  const auto outer = s.outer;
  return Tensor::op_result(std::move(out_shape), std::move(out), {x},
                           [outer, chunk, stride, start](const GradContext& ctx) {
                             auto g = ctx.input_grad(0);
                             if (g.empty()) return;
                             for (std::size_t o = 0; o < outer; ++o)
                               for (std::size_t i = 0; i < chunk; ++i)
                                 g[o * stride + start + i] += ctx.out_grad[o * chunk + i];
                           });
}

Tensor row_of(const Tensor& x, std::size_t i) {
  require_matrix(x, "row_of");
  return slice(x, 0, i, i + 1);
}

Tensor stack_rows(const std::vector<Tensor>& rows) { return concat(rows, 0); }

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_matrix(x, "gather_rows");
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  const auto n = x.rows(), d = x.cols();
  auto xv = x.values();
  std::vector<Real> out(indices.size() * d);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[r]) +
                           " out of range for " + std::to_string(n) + " rows");
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(indices[r] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::op_result({indices.size(), d}, std::move(out), {x},
                           [idx = std::move(idx), d](const GradContext& ctx) {
                             auto g = ctx.input_grad(0);
                             if (g.empty()) return;
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t c = 0; c < d; ++c)
                                 g[idx[r] * d + c] += ctx.out_grad[r * d + c];
                           });
}

Tensor scatter_add(const Tensor& values, std::span<const std::size_t> indices, std::size_t width) {
  if (values.size() != indices.size()) {
    throw DimensionError("scatter_add: " + std::to_string(values.size()) + " values but " +
                         std::to_string(indices.size()) + " indices");
  }
  auto vv = values.values();
  std::vector<Real> out(width, Real{0});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= width) throw DimensionError("scatter_add: index out of range");
    out[indices[i]] += vv[i];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::op_result({1, width}, std::move(out), {values},
                           [idx = std::move(idx)](const GradContext& ctx) {
                             auto g = ctx.input_grad(0);
                             if (g.empty()) return;
                             for (std::size_t i = 0; i < idx.size(); ++i) g[i] += ctx.out_grad[idx[i]];
                           });
}

Tensor pad_cols(const Tensor& row, std::size_t width) {
  if (row.rank() != 2 || row.rows() != 1) throw DimensionError("pad_cols: expected a 1 x n row");
  const auto n = row.cols();
  if (width < n) throw DimensionError("pad_cols: width smaller than input");
  std::vector<Real> out(width, Real{0});
  std::copy(row.values().begin(), row.values().end(), out.begin());
  return Tensor::op_result({1, width}, std::move(out), {row}, [n](const GradContext& ctx) {
    auto g = ctx.input_grad(0);
    if (g.empty()) return;
    for (std::size_t i = 0; i < n; ++i) g[i] += ctx.out_grad[i];
  });
}

Tensor pick(const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.size()) throw DimensionError("pick: index out of range");
  return Tensor::op_result({1}, {x.values()[flat_index]}, {x},
                           [flat_index](const GradContext& ctx) {
                             auto g = ctx.input_grad(0);
                             if (!g.empty()) g[flat_index] += ctx.out_grad[0];
                           });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (auto v : x.values()) total += v;
  return Tensor::op_result({1}, {total}, {x}, [](const GradContext& ctx) {
    auto g = ctx.input_grad(0);
    for (auto& v : g) v += ctx.out_grad[0];
  });
}

Tensor mean(const Tensor& x) { return affine(sum(x), Real{1} / static_cast<Real>(x.size()), 0); }

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  const auto r = x.rows(), k = x.cols(), n = weight.cols();
  if (weight.rows() != k) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " +
                         shape_str(weight.shape()));
  }
  if (bias.size() != n) throw DimensionError("linear: bias size mismatch");
  auto xv = x.values();
  auto wv = weight.values();
  auto bv = bias.values();
  std::vector<Real> out(r * n);
  for (std::size_t i = 0; i < r; ++i) {
    Real* orow = &out[i * n];
    std::copy(bv.begin(), bv.end(), orow);
    for (std::size_t p = 0; p < k; ++p) {
      const Real s = xv[i * k + p];
      if (s == Real{0}) continue;
      const Real* wrow = &wv[p * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * wrow[j];
    }
  }
  return Tensor::op_result(
      {r, n}, std::move(out), {x, weight, bias}, [r, k, n](const GradContext& ctx) {
        auto xv = ctx.inputs[0].values();
        auto wv = ctx.inputs[1].values();
        auto go = ctx.out_grad;
        if (auto gx = ctx.input_grad(0); !gx.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              Real acc = 0;
              for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * wv[p * n + j];
              gx[i * k + p] += acc;
            }
        }
        if (auto gw = ctx.input_grad(1); !gw.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const Real s = xv[i * k + p];
              if (s == Real{0}) continue;
              for (std::size_t j = 0; j < n; ++j) gw[p * n + j] += s * go[i * n + j];
            }
        }
        if (auto gb = ctx.input_grad(2); !gb.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
        }
      });
}

Tensor add_rowvec(const Tensor& x, const Tensor& row) {
  require_matrix(x, "add_rowvec");
  const auto r = x.rows(), n = x.cols();
  if (row.size() != n) throw DimensionError("add_rowvec: row size mismatch");
  auto xv = x.values();
  auto rv = row.values();
  std::vector<Real> out(r * n);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + rv[j];
  return Tensor::op_result({r, n}, std::move(out), {x, row}, [r, n](const GradContext& ctx) {
    accumulate(ctx.input_grad(0), ctx.out_grad, false);
    if (auto g = ctx.input_grad(1); !g.empty()) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += ctx.out_grad[i * n + j];
    }
  });
}

Tensor mul_rowvec(const Tensor& x, const Tensor& row) {
  require_matrix(x, "mul_rowvec");
  const auto r = x.rows(), n = x.cols();
  if (row.size() != n) throw DimensionError("mul_rowvec: row size mismatch");
  auto xv = x.values();
  auto rv = row.values();
  std::vector<Real> out(r * n);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * rv[j];
  return Tensor::op_result({r, n}, std::move(out), {x, row}, [r, n](const GradContext& ctx) {
    auto xv = ctx.inputs[0].values();
    auto rv = ctx.inputs[1].values();
    if (auto g = ctx.input_grad(0); !g.empty()) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += ctx.out_grad[i * n + j] * rv[j];
    }
    if (auto g = ctx.input_grad(1); !g.empty()) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += ctx.out_grad[i * n + j] * xv[i * n + j];
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_matrix(x, "scale_rows");
  const auto r = x.rows(), n = x.cols();
  if (s.size() != r) throw DimensionError("scale_rows: need one scale per row");
  auto xv = x.values();
  auto sv = s.values();
  std::vector<Real> out(r * n);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  return Tensor::op_result({r, n}, std::move(out), {x, s}, [r, n](const GradContext& ctx) {
    auto xv = ctx.inputs[0].values();
    auto sv = ctx.inputs[1].values();
    if (auto g = ctx.input_grad(0); !g.empty()) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += ctx.out_grad[i * n + j] * sv[i];
    }
    if (auto g = ctx.input_grad(1); !g.empty()) {
      for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += ctx.out_grad[i * n + j] * xv[i * n + j];
        g[i] += acc;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const auto d = x.shape().back();
  const auto rows = x.size() / d;
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(d) + " elements");
  }
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<Real> out(x.size());
  std::vector<Real> xhat(x.size());
  std::vector<Real> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = &xv[r * d];
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<Real>(d);
    inv_std[r] = Real{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * inv_std[r];
      out[r * d + j] = gv[j] * xhat[r * d + j] + bv[j];
    }
  }
  return Tensor::op_result(
      x.shape(), std::move(out), {x, gain, bias},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](const GradContext& ctx) {
        auto gv = ctx.inputs[1].values();
        auto go = ctx.out_grad;
        if (auto gx = ctx.input_grad(0); !gx.empty()) {
          std::vector<Real> gh(d);
          for (std::size_t r = 0; r < rows; ++r) {
            Real mean_gh = 0, mean_ghx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              gh[j] = go[r * d + j] * gv[j];
              mean_gh += gh[j];
              mean_ghx += gh[j] * xhat[r * d + j];
            }
            mean_gh /= static_cast<Real>(d);
            mean_ghx /= static_cast<Real>(d);
            for (std::size_t j = 0; j < d; ++j) {
              gx[r * d + j] += inv_std[r] * (gh[j] - mean_gh - xhat[r * d + j] * mean_ghx);
            }
          }
        }
        if (auto gg = ctx.input_grad(1); !gg.empty()) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gg[j] += go[r * d + j] * xhat[r * d + j];
        }
        if (auto gb = ctx.input_grad(2); !gb.empty()) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gb[j] += go[r * d + j];
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  if (x.rank() != 3 || weight.rank() != 4) {
    throw DimensionError("conv2d: expected C x H x W input and O x C x K x K weight");
  }
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const auto C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto O = weight.dim(0), K = weight.dim(2);
  if (weight.dim(1) != C || weight.dim(3) != K) {
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                         shape_str(x.shape()));
  }
  if (bias.size() != O) throw DimensionError("conv2d: bias size mismatch");
  if (H + 2 * padding < K || W + 2 * padding < K) throw DimensionError("conv2d: kernel larger than input");
  const auto OH = (H + 2 * padding - K) / stride + 1;
  const auto OW = (W + 2 * padding - K) / stride + 1;
  auto xv = x.values();
  auto wv = weight.values();
  auto bv = bias.values();
  std::vector<Real> out(O * OH * OW);
  for (std::size_t o = 0; o < O; ++o) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        Real acc = bv[o];
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t ky = 0; ky < K; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += wv[((o * C + c) * K + ky) * K + kx] *
                     xv[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
            }
          }
        }
        out[(o * OH + oy) * OW + ox] = acc;
      }
    }
  }
  return Tensor::op_result(
      {O, OH, OW}, std::move(out), {x, weight, bias},
      [=](const GradContext& ctx) {
        auto xv = ctx.inputs[0].values();
        auto wv = ctx.inputs[1].values();
        auto gx = ctx.input_grad(0);
        auto gw = ctx.input_grad(1);
        auto gb = ctx.input_grad(2);
        for (std::size_t o = 0; o < O; ++o) {
          for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const Real g = ctx.out_grad[(o * OH + oy) * OW + ox];
              if (!gb.empty()) gb[o] += g;
              if (g == Real{0}) continue;
              for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t ky = 0; ky < K; ++ky) {
                  const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                  for (std::size_t kx = 0; kx < K; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    const auto xi = (c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix);
                    const auto wi = ((o * C + c) * K + ky) * K + kx;
                    if (!gw.empty()) gw[wi] += g * xv[xi];
                    if (!gx.empty()) gx[xi] += g * wv[wi];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("global_avg_pool: expected C x H x W");
  const auto C = x.dim(0), area = x.dim(1) * x.dim(2);
  auto xv = x.values();
  std::vector<Real> out(C, Real{0});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < area; ++i) out[c] += xv[c * area + i];
    out[c] /= static_cast<Real>(area);
  }
  return Tensor::op_result({1, C}, std::move(out), {x}, [C, area](const GradContext& ctx) {
    auto g = ctx.input_grad(0);
    if (g.empty()) return;
    for (std::size_t c = 0; c < C; ++c) {
      const Real share = ctx.out_grad[c] / static_cast<Real>(area);
      for (std::size_t i = 0; i < area; ++i) g[c * area + i] += share;
    }
  });
}

}  // namespace dims
