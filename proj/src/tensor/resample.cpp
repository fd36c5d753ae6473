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
#include <cmath>

#include "aio/ops.hpp"
#include "impl.hpp"

namespace aio {

namespace {

struct LinearTap {
  std::int64_t i0, i1;
  double frac;
};

// Half-pixel-centre source taps for resizing an axis of length `in` to `out`.
std::vector<LinearTap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::int64_t i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

Tensor avg_pool2(const Tensor& input) {
  if (input.ndim() != 3) throw DimensionError("avg_pool2: expected [C,H,W], got " + shape_str(input.shape()));
  const std::int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h == 0 || w == 0) throw DimensionError("avg_pool2: empty spatial axes in " + shape_str(input.shape()));
  const std::int64_t ho = (h + 1) / 2, wo = (w + 1) / 2;
  Tensor out = detail::make_tensor({c, ho, wo}, input.dtype());
  dispatch(input.dtype(), [&]<class T>() {
    auto xi = input.impl();
    const T* x = xi->template ptr<T>();
    T* y = out.impl()->template ptr<T>();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t oy = 0; oy < ho; ++oy) {
        const std::int64_t y0 = 2 * oy, y1 = std::min(2 * oy + 1, h - 1);
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          const std::int64_t x0 = 2 * ox, x1 = std::min(2 * ox + 1, w - 1);
          const T* p = x + ch * h * w;
          y[(ch * ho + oy) * wo + ox] = (p[y0 * w + x0] + p[y0 * w + x1] + p[y1 * w + x0] + p[y1 * w + x1]) / T(4);
        }
      }
    }
    if (detail::should_record({&input})) {
      detail::record(out, "avg_pool2", {input}, [xi, c, h, w, ho, wo](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          T* p = gx + ch * h * w;
          for (std::int64_t oy = 0; oy < ho; ++oy) {
            const std::int64_t y0 = 2 * oy, y1 = std::min(2 * oy + 1, h - 1);
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const std::int64_t x0 = 2 * ox, x1 = std::min(2 * ox + 1, w - 1);
              const T q = g[(ch * ho + oy) * wo + ox] / T(4);
              p[y0 * w + x0] += q;
              p[y0 * w + x1] += q;
              p[y1 * w + x0] += q;
              p[y1 * w + x1] += q;
            }
          }
        }
      });
    }
  });
  return out;
}

Tensor avg_pool_last2(const Tensor& input) {
  if (input.ndim() < 1) throw DimensionError("avg_pool_last2: needs at least one axis");
  const std::int64_t d = input.dim(-1);
  if (d == 0) throw DimensionError("avg_pool_last2: empty last axis");
  const std::int64_t rows = input.numel() / d;
  const std::int64_t dout = (d + 1) / 2;
  Shape shape = input.shape();
  shape.back() = dout;
  Tensor out = detail::make_tensor(shape, input.dtype());
  dispatch(input.dtype(), [&]<class T>() {
    auto xi = input.impl();
    const T* x = xi->template ptr<T>();
    T* y = out.impl()->template ptr<T>();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t k = 0; k < dout; ++k) {
        const std::int64_t a = 2 * k, b = std::min(2 * k + 1, d - 1);
        y[r * dout + k] = (x[r * d + a] + x[r * d + b]) / T(2);
      }
    }
    if (detail::should_record({&input})) {
      detail::record(out, "avg_pool_last2", {input}, [xi, rows, d, dout](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        for (std::int64_t r = 0; r < rows; ++r) {
          for (std::int64_t k = 0; k < dout; ++k) {
            const std::int64_t a = 2 * k, b = std::min(2 * k + 1, d - 1);
            const T q = g[r * dout + k] / T(2);
            gx[r * d + a] += q;
            gx[r * d + b] += q;
          }
        }
      });
    }
  });
  return out;
}

Tensor interp_bilinear(const Tensor& input, std::int64_t out_h, std::int64_t out_w) {
  if (input.ndim() != 3) {
    throw DimensionError("interp_bilinear: expected [C,h,w], got " + shape_str(input.shape()));
  }
  if (out_h < 1 || out_w < 1) throw DimensionError("interp_bilinear: output size must be at least 1x1");
  const std::int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h == 0 || w == 0) throw DimensionError("interp_bilinear: empty spatial axes");
  auto ty = std::make_shared<std::vector<LinearTap>>(bilinear_taps(h, out_h));
  auto tx = std::make_shared<std::vector<LinearTap>>(bilinear_taps(w, out_w));
  Tensor out = detail::make_tensor({c, out_h, out_w}, input.dtype());
  dispatch(input.dtype(), [&]<class T>() {
    auto xi = input.impl();
    const T* x = xi->template ptr<T>();
    T* y = out.impl()->template ptr<T>();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T* p = x + ch * h * w;
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        const auto& a = (*ty)[static_cast<std::size_t>(oy)];
        const T fy = static_cast<T>(a.frac);
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          const auto& b = (*tx)[static_cast<std::size_t>(ox)];
          const T fx = static_cast<T>(b.frac);
          const T top = (T(1) - fx) * p[a.i0 * w + b.i0] + fx * p[a.i0 * w + b.i1];
          const T bot = (T(1) - fx) * p[a.i1 * w + b.i0] + fx * p[a.i1 * w + b.i1];
          y[(ch * out_h + oy) * out_w + ox] = (T(1) - fy) * top + fy * bot;
        }
      }
    }
    if (detail::should_record({&input})) {
      detail::record(out, "interp_bilinear", {input}, [xi, ty, tx, c, h, w, out_h, out_w](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          T* p = gx + ch * h * w;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const auto& a = (*ty)[static_cast<std::size_t>(oy)];
            const T fy = static_cast<T>(a.frac);
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const auto& b = (*tx)[static_cast<std::size_t>(ox)];
              const T fx = static_cast<T>(b.frac);
              const T q = g[(ch * out_h + oy) * out_w + ox];
              p[a.i0 * w + b.i0] += q * (T(1) - fy) * (T(1) - fx);
              p[a.i0 * w + b.i1] += q * (T(1) - fy) * fx;
              p[a.i1 * w + b.i0] += q * fy * (T(1) - fx);
              p[a.i1 * w + b.i1] += q * fy * fx;
            }
          }
        }
      });
    }
  });
  return out;
}

Tensor correlation(const Tensor& left, const Tensor& right, std::int64_t max_disp) {
  if (left.ndim() != 3) throw DimensionError("correlation: expected [C,h,w], got " + shape_str(left.shape()));
  if (left.shape() != right.shape()) {
    throw DimensionError("correlation: left " + shape_str(left.shape()) + " vs right " +
                         shape_str(right.shape()));
  }
  detail::require_same_dtype(left, right, "correlation");
  if (max_disp < 1) throw ContractError("correlation: max disparity must be at least 1");
  const std::int64_t c = left.dim(0), h = left.dim(1), w = left.dim(2), d = max_disp;
  Tensor out = detail::make_tensor({h, w, d}, left.dtype());
  dispatch(left.dtype(), [&]<class T>() {
    auto li = left.impl(), ri = right.impl();
    const T* l = li->template ptr<T>();
    const T* r = ri->template ptr<T>();
    T* y = out.impl()->template ptr<T>();
    const T s = T(1) / std::sqrt(static_cast<T>(c));
    const std::int64_t plane = h * w;
    for (std::int64_t yy = 0; yy < h; ++yy) {
      for (std::int64_t xx = 0; xx < w; ++xx) {
        T* cell = y + (yy * w + xx) * d;
        const std::int64_t zmax = std::min(d, xx + 1);
        for (std::int64_t z = 0; z < zmax; ++z) {
          T acc = 0;
          for (std::int64_t ch = 0; ch < c; ++ch) acc += l[ch * plane + yy * w + xx] * r[ch * plane + yy * w + xx - z];
          cell[z] = acc * s;
        }
      }
    }
    if (detail::should_record({&left, &right})) {
      detail::record(out, "correlation", {left, right}, [li, ri, c, h, w, d](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        const T* l = li->template ptr<T>();
        const T* r = ri->template ptr<T>();
        T* gl = li->requires_grad ? li->template grad_ptr<T>() : nullptr;
        T* gr = ri->requires_grad ? ri->template grad_ptr<T>() : nullptr;
        const T s = T(1) / std::sqrt(static_cast<T>(c));
        const std::int64_t plane = h * w;
        for (std::int64_t yy = 0; yy < h; ++yy) {
          for (std::int64_t xx = 0; xx < w; ++xx) {
            const T* cell = g + (yy * w + xx) * d;
            const std::int64_t zmax = std::min(d, xx + 1);
            for (std::int64_t z = 0; z < zmax; ++z) {
              const T q = cell[z] * s;
              if (q == T(0)) continue;
              for (std::int64_t ch = 0; ch < c; ++ch) {
                const std::int64_t il = ch * plane + yy * w + xx;
                if (gl) gl[il] += q * r[il - z];
                if (gr) gr[il - z] += q * l[il];
              }
            }
          }
        }
      });
    }
  });
  return out;
}

Tensor sample_volume(const Tensor& volume, const Tensor& disparity, double level_scale, int radius) {
  if (volume.ndim() != 3) {
    throw DimensionError("sample_volume: expected volume [h,w,D], got " + shape_str(volume.shape()));
  }
  const std::int64_t h = volume.dim(0), w = volume.dim(1), d = volume.dim(2);
  if (disparity.ndim() != 3 || disparity.dim(0) != 1 || disparity.dim(1) != h || disparity.dim(2) != w) {
    throw DimensionError("sample_volume: disparity must be [1," + std::to_string(h) + "," + std::to_string(w) +
                         "], got " + shape_str(disparity.shape()));
  }
  if (radius < 0) throw ContractError("sample_volume: radius must be non-negative");
  if (level_scale <= 0) throw ContractError("sample_volume: level scale must be positive");
  const std::int64_t taps = 2 * radius + 1;
  const auto disp = disparity.to_vector();

  // Per (tap, pixel): lower index and interpolation weight.
  auto lo = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(taps * h * w));
  auto frac = std::make_shared<std::vector<double>>(static_cast<std::size_t>(taps * h * w));
  for (std::int64_t t = 0; t < taps; ++t) {
    for (std::int64_t p = 0; p < h * w; ++p) {
      double pos = disp[static_cast<std::size_t>(p)] / level_scale + static_cast<double>(t - radius);
      pos = std::clamp(pos, 0.0, static_cast<double>(d - 1));
      auto i0 = static_cast<std::int64_t>(std::floor(pos));
      const auto k = static_cast<std::size_t>(t * h * w + p);
      (*lo)[k] = i0;
      (*frac)[k] = pos - static_cast<double>(i0);
    }
  }

  Tensor out = detail::make_tensor({taps, h, w}, volume.dtype());
  dispatch(volume.dtype(), [&]<class T>() {
    auto vi = volume.impl();
    const T* v = vi->template ptr<T>();
    T* y = out.impl()->template ptr<T>();
    for (std::int64_t t = 0; t < taps; ++t) {
      for (std::int64_t p = 0; p < h * w; ++p) {
        const auto k = static_cast<std::size_t>(t * h * w + p);
        const std::int64_t i0 = (*lo)[k];
        const std::int64_t i1 = std::min(i0 + 1, d - 1);
        const T f = static_cast<T>((*frac)[k]);
        y[k] = (T(1) - f) * v[p * d + i0] + f * v[p * d + i1];
      }
    }
    if (detail::should_record({&volume})) {
      detail::record(out, "sample_volume", {volume}, [vi, lo, frac, taps, h, w, d](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        T* gv = vi->template grad_ptr<T>();
        for (std::int64_t t = 0; t < taps; ++t) {
          for (std::int64_t p = 0; p < h * w; ++p) {
            const auto k = static_cast<std::size_t>(t * h * w + p);
            const std::int64_t i0 = (*lo)[k];
            const std::int64_t i1 = std::min(i0 + 1, d - 1);
            const T f = static_cast<T>((*frac)[k]);
            gv[p * d + i0] += g[k] * (T(1) - f);
            gv[p * d + i1] += g[k] * f;
          }
        }
      });
    }
  });
  return out;
}

}  // namespace aio
