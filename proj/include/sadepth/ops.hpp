#pragma once

#include <vector>

#include "sadepth/autodiff.hpp"

namespace sadepth::ops {

// ---- elementwise (right-aligned broadcasting) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
/// Elementwise min; on ties the gradient routes to `a`.
Var minimum(const Var& a, const Var& b);

Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);

// ---- unary ----
Var neg(const Var& a);
Var abs(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var reciprocal(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var elu(const Var& a); // alpha = 1
Var clamp(const Var& a, double lo, double hi);
Var detach(const Var& a);

// ---- reductions ----
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_axis(const Var& a, int64_t axis, bool keepdim);
Var mean_axis(const Var& a, int64_t axis, bool keepdim);

// ---- shape ----
Var reshape(const Var& a, std::vector<int64_t> shape);
Var slice(const Var& a, int64_t axis, int64_t start, int64_t len);
Var concat(const std::vector<Var>& parts, int64_t axis);
Var transpose_last2(const Var& a);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);         // (m,k) x (k,n)
Var batched_matmul(const Var& a, const Var& b); // (B,m,k) x (B,k,n)

/// Softmax over one axis, computed with max subtraction.
Var softmax(const Var& x, int64_t axis);

// ---- neural-net kernels ----
/// x (N,Cin,H,W), w (Cout,Cin,KH,KW), optional bias (Cout; pass Var() for none).
Var conv2d(const Var& x, const Var& w, const Var& bias, int64_t stride, int64_t pad, int64_t dilation = 1);
Var maxpool2d(const Var& x, int64_t kernel, int64_t stride, int64_t pad);
Var upsample_nearest2x(const Var& x);
/// Bilinear resize with half-pixel centers and border clamping.
Var resize_bilinear(const Var& x, int64_t out_h, int64_t out_w);
/// 3x3 mean filter with reflect padding, per channel.
Var box_filter3(const Var& x);
Var global_avg_pool(const Var& x); // (N,C,H,W) -> (N,C)

Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                    double momentum, double eps);
Var batchnorm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                   const Tensor& running_var, double eps);

/// image (N,C,H,W); grid (N,Hg,Wg,2) of (u,v) source coordinates in pixels.
/// Out-of-range coordinates clamp to the border. Differentiable in both.
Var grid_sample(const Var& image, const Var& grid);

// ---- broadcast helpers (shared with other modules) ----
std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a, const std::vector<int64_t>& b);
/// Sum `g` down to `target_shape` (inverse of broadcasting).
Tensor reduce_to_shape(const Tensor& g, const std::vector<int64_t>& target_shape);
void accumulate(Tensor& into, const Tensor& from); // elementwise +=

} // namespace sadepth::ops
