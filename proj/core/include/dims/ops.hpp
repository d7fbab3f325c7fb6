#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dims/tensor.hpp"

namespace dims {

// Broadcasting is limited to equal shapes or one operand of size 1.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// scale * x + shift with constant coefficients.
Tensor affine(const Tensor& x, Real scale, Real shift);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
/// log(max(x, floor)); the gradient is zero where the floor is active.
Tensor log_floor(const Tensor& x, Real floor);

/// [m x k] * [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Row i of a matrix as a 1 x n tensor.
Tensor row_of(const Tensor& x, std::size_t i);
/// Stack 1 x n rows into a k x n matrix.
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// out[0, indices[i]] += values[i]; result is 1 x width.
Tensor scatter_add(const Tensor& values, std::span<const std::size_t> indices, std::size_t width);
/// Right-pads a 1 x n row with zeros to 1 x width.
Tensor pad_cols(const Tensor& row, std::size_t width);
/// Single element as a scalar tensor.
Tensor pick(const Tensor& x, std::size_t flat_index);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// x W + b with b broadcast over rows (b is 1 x n).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor add_rowvec(const Tensor& x, const Tensor& row);
Tensor mul_rowvec(const Tensor& x, const Tensor& row);
/// Multiplies row r of x by s[r]; s has x.rows() elements.
Tensor scale_rows(const Tensor& x, const Tensor& s);

/// Per-row normalization over the last axis followed by gain * x + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps);

/// x is C x H x W, weight is O x C x K x K, bias has O elements.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// C x H x W -> 1 x C.
Tensor global_avg_pool(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(Real s, const Tensor& x) { return affine(x, s, Real{0}); }
inline Tensor operator+(const Tensor& x, Real s) { return affine(x, Real{1}, s); }
/// s - x
inline Tensor operator-(Real s, const Tensor& x) { return affine(x, Real{-1}, s); }

}  // namespace dims
