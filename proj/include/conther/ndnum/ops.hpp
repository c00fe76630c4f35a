#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "conther/ndnum/tensor.hpp"

namespace conther::nd {

// Every op records itself in the graph when grad mode is on and at least one
// input requires a gradient. Shape errors throw DimensionError.

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched product: [B,m,k] x [B,k,n] -> [B,m,n]; with transpose_b the
/// second operand is [B,n,k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
/// x [m,n] plus a length-n row broadcast over all rows.
Tensor add_row(const Tensor& x, const Tensor& row);
/// Elementwise minimum; ties route the gradient to `a`.
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// log(1 + exp(x)), evaluated stably.
Tensor softplus(const Tensor& x);
Tensor square(const Tensor& x);

/// Softmax along `axis` with max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);

inline constexpr double kLayerNormEpsilon = 1e-5;
/// Normalizes each slice along the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor reshape(const Tensor& x, Shape shape);
/// [a,b,c,d] -> [a,c,b,d].
Tensor swap_axes_12(const Tensor& x);
/// Concatenates 2-D tensors with equal row counts along columns.
Tensor concat_cols(std::span<const Tensor> parts);
/// Rows of a 2-D tensor picked by index (repeats allowed).
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace conther::nd
