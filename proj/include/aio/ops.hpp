/*
 * Copyright 2026 The aio-stereo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <vector>

#include "aio/tensor.hpp"

namespace aio {

/// Cross-correlation. `input` is [C_in,H,W] or [N,C_in,H,W]; `weight` is
/// [C_out,C_in,kh,kw]; `bias` is [C_out] (may be undefined).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
              int padding = 0);

/// 2x2 mean pooling of [C,H,W]. Odd H or W is replicate-padded at the
/// bottom/right, so the output is [C,ceil(H/2),ceil(W/2)].
Tensor avg_pool2(const Tensor& input);

/// Mean of adjacent pairs along the last axis; odd lengths replicate-pad the
/// final element.
Tensor avg_pool_last2(const Tensor& input);

/// Bilinear resize of [C,h,w] with half-pixel centres (align_corners=false).
Tensor interp_bilinear(const Tensor& input, std::int64_t out_h, std::int64_t out_w);

// Elementwise ops. Shapes must match exactly, except that mul() accepts a
// [1,h,w] operand against a [C,h,w] one (gate weights over feature channels).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// max(x, lo); the gradient passes where x >= lo.
Tensor clamp_min(const Tensor& x, double lo);

enum class PointwiseKind { add, sub, mul, relu, sigmoid, tanh, scale };

/// Table-driven entry point over the elementwise ops above. Binary kinds use
/// `a` and `b`; `scale` multiplies `a` by `factor`; unary kinds use `a` only.
Tensor pointwise(PointwiseKind kind, const Tensor& a, const Tensor& b = {}, double factor = 1.0);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, int axis);

/// Keeps the `k` largest entries along axis 0 of [T,...] and zeroes the rest.
/// Equal values prefer the lower index. The selection mask is a constant in
/// backward.
Tensor keep_topk(const Tensor& x, int k);

/// Per-channel normalisation of [C,H,W] over the spatial axes (biased
/// variance, no affine terms).
Tensor instance_norm(const Tensor& x, double eps = 1e-5);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

enum class LossKind { mse, l1 };

/// Mean over elements where `mask` is nonzero (all elements if mask is
/// undefined). Throws EmptyReductionError if nothing is selected.
Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target, const Tensor& mask = {});
inline Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask = {}) {
  return loss(LossKind::mse, pred, target, mask);
}
inline Tensor l1_loss(const Tensor& pred, const Tensor& target, const Tensor& mask = {}) {
  return loss(LossKind::l1, pred, target, mask);
}

Tensor concat(const std::vector<Tensor>& parts, int axis = 0);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
Tensor reshape(const Tensor& x, Shape shape);

/// Cost volume [h,w,D] from [C,h,w] features:
///   out(y,x,z) = <left(:,y,x), right(:,y,x-z)> / sqrt(C), zero where x-z < 0.
Tensor correlation(const Tensor& left, const Tensor& right, std::int64_t max_disp);

/// Linear samples of a [h,w,D] volume along its last axis at
/// positions disparity(y,x)/level_scale + delta for delta in [-radius, radius],
/// clamped to [0, D-1]. Output is [2*radius+1, h, w]. `disparity` ([1,h,w]) is
/// read as a constant.
Tensor sample_volume(const Tensor& volume, const Tensor& disparity, double level_scale, int radius);

}  // namespace aio
