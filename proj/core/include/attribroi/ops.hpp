#pragma once

// Differentiable primitives over Tensor. Every op validates shapes up front,
// computes the forward value, and (when grad is enabled and an input requires
// it) pushes a backprop closure onto the active ComputationRecord.

#include <cstddef>
#include <vector>

#include "attribroi/tensor.hpp"

namespace attribroi::ops {

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Elementwise a / b with the denominator floored at 1e-12 (probability-style
// denominators only; where the floor engages, d/db is 0).
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, double s);
Tensor relu(const Tensor& t);
Tensor gelu(const Tensor& t);  // tanh approximation, exact analytic derivative
// ln(max(x, 1e-12)); derivative 0 where the clamp engages.
Tensor log(const Tensor& t);

// ---- linear algebra --------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n] -> [m,n]
Tensor add_bias(const Tensor& x, const Tensor& bias);  // rows of [m,n] + [n]
Tensor transpose(const Tensor& t);                     // rank-2 only

// ---- normalization ---------------------------------------------------------
// Normalizes each length-D slice along the last axis, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// Max-subtraction stabilized; rejects non-finite inputs.
Tensor softmax(const Tensor& t, std::size_t axis);

// ---- reductions ------------------------------------------------------------
Tensor sum(const Tensor& t);   // -> scalar
Tensor mean(const Tensor& t);  // -> scalar
Tensor mean_axis(const Tensor& t, std::size_t axis);

// ---- shape -----------------------------------------------------------------
Tensor reshape(const Tensor& t, const Shape& shape);
// out.flat[j] = t.flat[indices[j]]; backward scatter-adds. Bounds-checked.
Tensor gather(const Tensor& t, std::vector<std::size_t> indices, const Shape& out_shape);
// Rows [start, start+count) of a rank-2 tensor.
Tensor slice_rows(const Tensor& t, std::size_t start, std::size_t count);
// Rank-2 concatenation along axis 0 (rows) or 1 (columns).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// ---- resampling ------------------------------------------------------------
// [h,w] -> [out_h,out_w], align-corners bilinear interpolation.
Tensor upsample_bilinear(const Tensor& t, std::size_t out_h, std::size_t out_w);

}  // namespace attribroi::ops
