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

#include <algorithm>

#include <Eigen/Core>

#include "aio/ops.hpp"
#include "impl.hpp"

namespace aio {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeom {
  std::int64_t c_in, h, w, c_out, kh, kw, stride, pad, h_out, w_out;
  std::int64_t k() const { return c_in * kh * kw; }
  std::int64_t hw_out() const { return h_out * w_out; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Output columns [lo, hi) whose input column ox*stride - pad + j lies inside [0, w).
inline void valid_range(const ConvGeom& g, std::int64_t j, std::int64_t& lo, std::int64_t& hi) {
  const std::int64_t a = g.pad - j;  // need ox*stride >= a
  lo = a <= 0 ? 0 : (a + g.stride - 1) / g.stride;
  const std::int64_t b = g.w + g.pad - j;  // need ox*stride < b
  hi = b <= 0 ? 0 : (b + g.stride - 1) / g.stride;
  lo = std::min(lo, g.w_out);
  hi = std::clamp(hi, lo, g.w_out);
}

template <class T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
  const std::int64_t hw_out = g.hw_out();
  for (std::int64_t c = 0; c < g.c_in; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * hw_out;
        std::int64_t lo, hi;
        valid_range(g, j, lo, hi);
        for (std::int64_t oy = 0; oy < g.h_out; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + i;
          T* dst = row + oy * g.w_out;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.w_out, T(0));
            continue;
          }
          std::fill(dst, dst + lo, T(0));
          std::fill(dst + hi, dst + g.w_out, T(0));
          const T* src = x + (c * g.h + iy) * g.w - g.pad + j;
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride];
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* cols, const ConvGeom& g, T* dx) {
  const std::int64_t hw_out = g.hw_out();
  for (std::int64_t c = 0; c < g.c_in; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * hw_out;
        std::int64_t lo, hi;
        valid_range(g, j, lo, hi);
        for (std::int64_t oy = 0; oy < g.h_out; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + i;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.w_out;
          T* dst = dx + (c * g.h + iy) * g.w - g.pad + j;
          if (g.stride == 1) {
            for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox * g.stride] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  if (!input.defined() || !weight.defined()) throw ContractError("conv2d: undefined operand");
  const int nd = input.ndim();
  if (nd != 3 && nd != 4) {
    throw DimensionError("conv2d: input must be [C,H,W] or [N,C,H,W], got " + shape_str(input.shape()));
  }
  if (weight.ndim() != 4) {
    throw DimensionError("conv2d: weight must be [C_out,C_in,kh,kw], got " + shape_str(weight.shape()));
  }
  if (stride < 1) throw ContractError("conv2d: stride must be positive");
  if (padding < 0) throw ContractError("conv2d: padding must be non-negative");
  detail::require_same_dtype(input, weight, "conv2d");

  const std::int64_t batch = nd == 4 ? input.dim(0) : 1;
  ConvGeom g{};
  g.c_in = input.dim(-3);
  g.h = input.dim(-2);
  g.w = input.dim(-1);
  g.c_out = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (weight.dim(1) != g.c_in) {
    throw DimensionError("conv2d: channel axis mismatch, input has " + std::to_string(g.c_in) +
                         " channels but weight expects " + std::to_string(weight.dim(1)));
  }
  if (g.h + 2 * g.pad < g.kh) {
    throw DimensionError("conv2d: height axis " + std::to_string(g.h) + " (+2*" + std::to_string(g.pad) +
                         " padding) is smaller than kernel height " + std::to_string(g.kh));
  }
  if (g.w + 2 * g.pad < g.kw) {
    throw DimensionError("conv2d: width axis " + std::to_string(g.w) + " (+2*" + std::to_string(g.pad) +
                         " padding) is smaller than kernel width " + std::to_string(g.kw));
  }
  if (bias.defined()) {
    if (bias.ndim() != 1 || bias.dim(0) != g.c_out) {
      throw DimensionError("conv2d: bias axis 0 must have length " + std::to_string(g.c_out) + ", got " +
                           shape_str(bias.shape()));
    }
    detail::require_same_dtype(input, bias, "conv2d");
  }
  g.h_out = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.w_out = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  Shape out_shape = nd == 4 ? Shape{batch, g.c_out, g.h_out, g.w_out} : Shape{g.c_out, g.h_out, g.w_out};
  Tensor out = detail::make_tensor(out_shape, input.dtype());
  const bool rec = detail::should_record({&input, &weight, &bias});
  const bool keep_cols = rec && (weight.requires_grad());

  return dispatch(input.dtype(), [&]<class T>() {
    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    auto oi = out.impl();
    const std::int64_t in_stride = g.c_in * g.h * g.w;
    const std::int64_t out_stride = g.c_out * g.hw_out();
    Eigen::Map<const RowMat<T>> wm(wi->template ptr<T>(), g.c_out, g.k());

    auto saved_cols = std::make_shared<std::vector<AlignedVec<T>>>();
    AlignedVec<T> cols;
    for (std::int64_t n = 0; n < batch; ++n) {
      const T* x = xi->template ptr<T>() + n * in_stride;
      T* y = oi->template ptr<T>() + n * out_stride;
      Eigen::Map<RowMat<T>> ym(y, g.c_out, g.hw_out());
      if (g.pointwise()) {
        ym.noalias() = wm * Eigen::Map<const RowMat<T>>(x, g.c_in, g.hw_out());
      } else {
        cols.resize(static_cast<std::size_t>(g.k() * g.hw_out()));
        im2col(x, g, cols.data());
        ym.noalias() = wm * Eigen::Map<const RowMat<T>>(cols.data(), g.k(), g.hw_out());
        if (keep_cols) saved_cols->push_back(std::move(cols));
      }
      if (bi) {
        const T* b = bi->template ptr<T>();
        for (std::int64_t c = 0; c < g.c_out; ++c) ym.row(c).array() += b[c];
      }
    }

    if (rec) {
      std::vector<Tensor> inputs{input, weight};
      if (bias.defined()) inputs.push_back(bias);
      detail::record(out, "conv2d", inputs, [xi, wi, bi, g, batch, saved_cols](TensorImpl& o) {
        const std::int64_t in_stride = g.c_in * g.h * g.w;
        const std::int64_t out_stride = g.c_out * g.hw_out();
        Eigen::Map<const RowMat<T>> wm(wi->template ptr<T>(), g.c_out, g.k());
        AlignedVec<T> dcols;
        for (std::int64_t n = 0; n < batch; ++n) {
          Eigen::Map<const RowMat<T>> dy(o.template grad_cptr<T>() + n * out_stride, g.c_out, g.hw_out());
          if (bi && bi->requires_grad) {
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bi->template grad_ptr<T>(), g.c_out);
            db += dy.rowwise().sum();
          }
          if (wi->requires_grad) {
            Eigen::Map<RowMat<T>> dw(wi->template grad_ptr<T>(), g.c_out, g.k());
            if (g.pointwise()) {
              dw.noalias() +=
                  dy * Eigen::Map<const RowMat<T>>(xi->template ptr<T>() + n * in_stride, g.c_in, g.hw_out())
                           .transpose();
            } else {
              const auto& cols = (*saved_cols)[static_cast<std::size_t>(n)];
              dw.noalias() += dy * Eigen::Map<const RowMat<T>>(cols.data(), g.k(), g.hw_out()).transpose();
            }
          }
          if (xi->requires_grad) {
            T* dx = xi->template grad_ptr<T>() + n * in_stride;
            if (g.pointwise()) {
              Eigen::Map<RowMat<T>> dxm(dx, g.c_in, g.hw_out());
              dxm.noalias() += wm.transpose() * dy;
            } else {
              dcols.resize(static_cast<std::size_t>(g.k() * g.hw_out()));
              Eigen::Map<RowMat<T>> dc(dcols.data(), g.k(), g.hw_out());
              dc.noalias() = wm.transpose() * dy;
              col2im(dcols.data(), g, dx);
            }
          }
        }
      });
    }
    return out;
  });
}

}  // namespace aio
