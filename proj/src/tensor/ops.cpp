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
#include <numeric>

#include "aio/ops.hpp"
#include "impl.hpp"

namespace aio {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return;
  if (a.ndim() != b.ndim()) {
    throw DimensionError(std::string(op) + ": rank mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  for (int i = 0; i < a.ndim(); ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw DimensionError(std::string(op) + ": axis " + std::to_string(i) + " mismatch " +
                           shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
  }
}

// Unary elementwise op: fwd(x) -> y, bwd(x, y) -> dy/dx.
template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& x, const char* name, Fwd fwd, Bwd bwd) {
  Tensor out = detail::make_tensor(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xi = x.impl();
    auto oi = out.impl();
    const T* xp = xi->template ptr<T>();
    T* yp = oi->template ptr<T>();
    const std::int64_t n = xi->numel();
    for (std::int64_t i = 0; i < n; ++i) yp[i] = fwd(xp[i]);
    if (detail::should_record({&x})) {
      detail::record(out, name, {x}, [xi, bwd](TensorImpl& o) {
        const T* xp = xi->template ptr<T>();
        const T* yp = o.template ptr<T>();
        const T* gy = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        const std::int64_t n = xi->numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += gy[i] * bwd(xp[i], yp[i]);
      });
    }
  });
  return out;
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  detail::require_same_dtype(a, b, "add");
  Tensor out = detail::make_tensor(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    const std::int64_t n = ai->numel();
    const T* ap = ai->template ptr<T>();
    const T* bp = bi->template ptr<T>();
    T* op = oi->template ptr<T>();
    for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
    if (detail::should_record({&a, &b})) {
      detail::record(out, "add", {a, b}, [ai, bi](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        const std::int64_t n = o.numel();
        if (ai->requires_grad) {
          T* ga = ai->template grad_ptr<T>();
          for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (bi->requires_grad) {
          T* gb = bi->template grad_ptr<T>();
          for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
      });
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  detail::require_same_dtype(a, b, "sub");
  Tensor out = detail::make_tensor(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    const std::int64_t n = ai->numel();
    const T* ap = ai->template ptr<T>();
    const T* bp = bi->template ptr<T>();
    T* op = oi->template ptr<T>();
    for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] - bp[i];
    if (detail::should_record({&a, &b})) {
      detail::record(out, "sub", {a, b}, [ai, bi](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        const std::int64_t n = o.numel();
        if (ai->requires_grad) {
          T* ga = ai->template grad_ptr<T>();
          for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (bi->requires_grad) {
          T* gb = bi->template grad_ptr<T>();
          for (std::int64_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
      });
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_dtype(a, b, "mul");
  // The one sanctioned broadcast: [1,h,w] against [C,h,w], in either order.
  const bool b_bcast = a.ndim() == 3 && b.ndim() == 3 && b.dim(0) == 1 && a.dim(0) != 1 &&
                       a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2);
  const bool a_bcast = a.ndim() == 3 && b.ndim() == 3 && a.dim(0) == 1 && b.dim(0) != 1 &&
                       a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2);
  if (a_bcast) return mul(b, a);
  if (!b_bcast) require_same_shape(a, b, "mul");

  Tensor out = detail::make_tensor(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<class T>() {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    const std::int64_t n = ai->numel();
    const std::int64_t plane = b_bcast ? bi->numel() : n;  // b repeats every `plane` elements
    const T* ap = ai->template ptr<T>();
    const T* bp = bi->template ptr<T>();
    T* op = oi->template ptr<T>();
    for (std::int64_t i = 0; i < n; ++i) op[i] = ap[i] * bp[i % plane];
    if (detail::should_record({&a, &b})) {
      detail::record(out, b_bcast ? "mul_broadcast" : "mul", {a, b}, [ai, bi, plane](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        const T* ap = ai->template ptr<T>();
        const T* bp = bi->template ptr<T>();
        const std::int64_t n = o.numel();
        if (ai->requires_grad) {
          T* ga = ai->template grad_ptr<T>();
          for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * bp[i % plane];
        }
        if (bi->requires_grad) {
          T* gb = bi->template grad_ptr<T>();
          for (std::int64_t i = 0; i < n; ++i) gb[i % plane] += g[i] * ap[i];
        }
      });
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  return dispatch(x.dtype(), [&]<class T>() {
    const T f = static_cast<T>(factor);
    return unary_op(
        x, "scale", [f](T v) { return v * f; }, [f](T, T) { return f; });
  });
}

Tensor add_scalar(const Tensor& x, double value) {
  return dispatch(x.dtype(), [&]<class T>() {
    const T c = static_cast<T>(value);
    return unary_op(
        x, "add_scalar", [c](T v) { return v + c; }, [](T, T) { return T(1); });
  });
}

Tensor relu(const Tensor& x) {
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    return unary_op(
        x, "relu", [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
  });
  if (detail::branch_recording()) {
    dispatch(x.dtype(), [&]<class T>() {
      std::uint64_t h = 0;
      for (T v : x.data<T>()) h = detail::mix_hash(h, v > T(0));
      detail::record_branch(h);
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return dispatch(x.dtype(), [&]<class T>() {
    return unary_op(
        x, "sigmoid", [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
  });
}

Tensor tanh(const Tensor& x) {
  return dispatch(x.dtype(), [&]<class T>() {
    return unary_op(
        x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
  });
}

Tensor clamp_min(const Tensor& x, double lo) {
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    const T l = static_cast<T>(lo);
    return unary_op(
        x, "clamp_min", [l](T v) { return v > l ? v : l; }, [l](T v, T) { return v >= l ? T(1) : T(0); });
  });
  if (detail::branch_recording()) {
    dispatch(x.dtype(), [&]<class T>() {
      std::uint64_t h = 0;
      for (T v : x.data<T>()) h = detail::mix_hash(h, v > static_cast<T>(lo));
      detail::record_branch(h);
    });
  }
  return out;
}

Tensor pointwise(PointwiseKind kind, const Tensor& a, const Tensor& b, double factor) {
  switch (kind) {
    case PointwiseKind::add: return add(a, b);
    case PointwiseKind::sub: return sub(a, b);
    case PointwiseKind::mul: return mul(a, b);
    case PointwiseKind::relu: return relu(a);
    case PointwiseKind::sigmoid: return sigmoid(a);
    case PointwiseKind::tanh: return tanh(a);
    case PointwiseKind::scale: return scale(a, factor);
  }
  throw ContractError("pointwise: unknown kind");
}

Tensor softmax(const Tensor& x, int axis) {
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) {
    throw DimensionError("softmax: axis out of range for shape " + shape_str(x.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  const std::int64_t len = x.dim(axis);

  Tensor out = detail::make_tensor(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xi = x.impl(), oi = out.impl();
    const T* xp = xi->template ptr<T>();
    T* yp = oi->template ptr<T>();
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t in = 0; in < inner; ++in) {
        const std::int64_t base = o * len * inner + in;
        T mx = xp[base];
        for (std::int64_t k = 1; k < len; ++k) mx = std::max(mx, xp[base + k * inner]);
        T total = 0;
        for (std::int64_t k = 0; k < len; ++k) {
          const T e = std::exp(xp[base + k * inner] - mx);
          yp[base + k * inner] = e;
          total += e;
        }
        for (std::int64_t k = 0; k < len; ++k) yp[base + k * inner] /= total;
      }
    }
    if (detail::should_record({&x})) {
      detail::record(out, "softmax", {x}, [xi, outer, inner, len](TensorImpl& o) {
        const T* y = o.template ptr<T>();
        const T* gy = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        for (std::int64_t ou = 0; ou < outer; ++ou) {
          for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = ou * len * inner + in;
            T dot = 0;
            for (std::int64_t k = 0; k < len; ++k) dot += gy[base + k * inner] * y[base + k * inner];
            for (std::int64_t k = 0; k < len; ++k) {
              const std::int64_t idx = base + k * inner;
              gx[idx] += y[idx] * (gy[idx] - dot);
            }
          }
        }
      });
    }
  });
  return out;
}

Tensor keep_topk(const Tensor& x, int k) {
  if (x.ndim() < 1) throw DimensionError("keep_topk: needs at least one axis");
  const std::int64_t len = x.dim(0);
  if (k < 1 || k > len) {
    throw ContractError("keep_topk: k=" + std::to_string(k) + " outside [1, " + std::to_string(len) + "]");
  }
  const std::int64_t inner = x.numel() / std::max<std::int64_t>(len, 1);

  Tensor out = detail::make_tensor(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xi = x.impl(), oi = out.impl();
    const T* xp = xi->template ptr<T>();
    T* yp = oi->template ptr<T>();
    auto mask = std::make_shared<std::vector<unsigned char>>(static_cast<std::size_t>(x.numel()), 0);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(len));
    std::uint64_t digest = 0;
    for (std::int64_t p = 0; p < inner; ++p) {
      std::iota(idx.begin(), idx.end(), 0);
      // Stable sort on descending value keeps the lower index first among ties.
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::int64_t a, std::int64_t b) { return xp[a * inner + p] > xp[b * inner + p]; });
      for (int r = 0; r < k; ++r) {
        const std::int64_t e = idx[static_cast<std::size_t>(r)] * inner + p;
        (*mask)[static_cast<std::size_t>(e)] = 1;
        digest = detail::mix_hash(digest, static_cast<std::uint64_t>(e));
      }
    }
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) yp[i] = (*mask)[static_cast<std::size_t>(i)] ? xp[i] : T(0);
    if (detail::branch_recording()) detail::record_branch(digest);
    if (detail::should_record({&x})) {
      detail::record(out, "keep_topk", {x}, [xi, mask](TensorImpl& o) {
        const T* gy = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        const std::int64_t n = o.numel();
        for (std::int64_t i = 0; i < n; ++i) {
          if ((*mask)[static_cast<std::size_t>(i)]) gx[i] += gy[i];
        }
      });
    }
  });
  return out;
}

Tensor instance_norm(const Tensor& x, double eps) {
  if (x.ndim() != 3) throw DimensionError("instance_norm: expected [C,H,W], got " + shape_str(x.shape()));
  const std::int64_t channels = x.dim(0);
  const std::int64_t plane = x.dim(1) * x.dim(2);
  if (plane == 0) throw DimensionError("instance_norm: empty spatial axes");

  Tensor out = detail::make_tensor(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xi = x.impl(), oi = out.impl();
    const T* xp = xi->template ptr<T>();
    T* yp = oi->template ptr<T>();
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(channels));
    for (std::int64_t c = 0; c < channels; ++c) {
      const T* xc = xp + c * plane;
      T m = 0;
      for (std::int64_t i = 0; i < plane; ++i) m += xc[i];
      m /= static_cast<T>(plane);
      T var = 0;
      for (std::int64_t i = 0; i < plane; ++i) var += (xc[i] - m) * (xc[i] - m);
      var /= static_cast<T>(plane);
      const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
      (*inv_std)[static_cast<std::size_t>(c)] = is;
      for (std::int64_t i = 0; i < plane; ++i) yp[c * plane + i] = (xc[i] - m) * is;
    }
    if (detail::should_record({&x})) {
      detail::record(out, "instance_norm", {x}, [xi, inv_std, channels, plane](TensorImpl& o) {
        const T* y = o.template ptr<T>();
        const T* gy = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        const T np = static_cast<T>(plane);
        for (std::int64_t c = 0; c < channels; ++c) {
          const T* yc = y + c * plane;
          const T* gc = gy + c * plane;
          T mean_g = 0, mean_gy = 0;
          for (std::int64_t i = 0; i < plane; ++i) {
            mean_g += gc[i];
            mean_gy += gc[i] * yc[i];
          }
          mean_g /= np;
          mean_gy /= np;
          const T is = (*inv_std)[static_cast<std::size_t>(c)];
          for (std::int64_t i = 0; i < plane; ++i) gx[c * plane + i] += is * (gc[i] - mean_g - yc[i] * mean_gy);
        }
      });
    }
  });
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = detail::make_tensor({}, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xi = x.impl();
    T total = 0;
    for (T v : xi->template vec<T>()) total += v;
    out.impl()->template ptr<T>()[0] = total;
    if (detail::should_record({&x})) {
      detail::record(out, "sum", {x}, [xi](TensorImpl& o) {
        const T g = o.template grad_cptr<T>()[0];
        T* gx = xi->template grad_ptr<T>();
        const std::int64_t n = xi->numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
      });
    }
  });
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw EmptyReductionError("mean over an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target, const Tensor& mask) {
  const char* name = kind == LossKind::mse ? "mse_loss" : "l1_loss";
  require_same_shape(pred, target, name);
  detail::require_same_dtype(pred, target, name);
  if (mask.defined()) require_same_shape(pred, mask, name);

  Tensor out = detail::make_tensor({}, pred.dtype());
  dispatch(pred.dtype(), [&]<class T>() {
    auto pi = pred.impl(), ti = target.impl();
    const std::int64_t n = pi->numel();
    std::vector<double> mvals = mask.defined() ? mask.to_vector() : std::vector<double>();
    auto selected = std::make_shared<std::vector<unsigned char>>(static_cast<std::size_t>(n), 1);
    std::int64_t count = n;
    if (mask.defined()) {
      count = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const bool on = mvals[static_cast<std::size_t>(i)] != 0.0;
        (*selected)[static_cast<std::size_t>(i)] = on;
        count += on;
      }
    }
    if (count == 0) throw EmptyReductionError(std::string(name) + ": mask selects no elements");
    const T* p = pi->template ptr<T>();
    const T* t = ti->template ptr<T>();
    T total = 0;
    std::uint64_t digest = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (!(*selected)[static_cast<std::size_t>(i)]) continue;
      const T d = p[i] - t[i];
      if (kind == LossKind::mse) {
        total += d * d;
      } else {
        total += std::abs(d);
        digest = detail::mix_hash(digest, d > T(0) ? 2u : (d < T(0) ? 1u : 0u));
      }
    }
    out.impl()->template ptr<T>()[0] = total / static_cast<T>(count);
    if (kind == LossKind::l1 && detail::branch_recording()) detail::record_branch(digest);

    if (detail::should_record({&pred, &target})) {
      detail::record(out, name, {pred, target}, [pi, ti, selected, count, kind](TensorImpl& o) {
        const T g = o.template grad_cptr<T>()[0] / static_cast<T>(count);
        const T* p = pi->template ptr<T>();
        const T* t = ti->template ptr<T>();
        T* gp = pi->requires_grad ? pi->template grad_ptr<T>() : nullptr;
        T* gt = ti->requires_grad ? ti->template grad_ptr<T>() : nullptr;
        const std::int64_t n = pi->numel();
        for (std::int64_t i = 0; i < n; ++i) {
          if (!(*selected)[static_cast<std::size_t>(i)]) continue;
          const T d = p[i] - t[i];
          T dd;
          if (kind == LossKind::mse) {
            dd = T(2) * d;
          } else {
            dd = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
          }
          if (gp) gp[i] += g * dd;
          if (gt) gt[i] -= g * dd;
        }
      });
    }
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Tensor& first = parts.front();
  const int nd = first.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw DimensionError("concat: axis out of range");
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= first.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= first.dim(i);
  std::int64_t total_len = 0;
  for (const auto& p : parts) {
    detail::require_same_dtype(first, p, "concat");
    if (p.ndim() != nd) throw DimensionError("concat: rank mismatch " + shape_str(p.shape()));
    for (int i = 0; i < nd; ++i) {
      if (i != axis && p.dim(i) != first.dim(i)) {
        throw DimensionError("concat: axis " + std::to_string(i) + " mismatch " + shape_str(first.shape()) +
                             " vs " + shape_str(p.shape()));
      }
    }
    total_len += p.dim(axis);
  }
  Shape shape = first.shape();
  shape[static_cast<std::size_t>(axis)] = total_len;
  Tensor out = detail::make_tensor(shape, first.dtype());

  dispatch(first.dtype(), [&]<class T>() {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    std::vector<std::int64_t> lens;
    for (const auto& p : parts) {
      impls.push_back(p.impl());
      lens.push_back(p.dim(axis));
    }
    T* yp = out.impl()->template ptr<T>();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::int64_t offset = 0;
      for (std::size_t k = 0; k < impls.size(); ++k) {
        const std::int64_t chunk = lens[k] * inner;
        const T* src = impls[k]->template ptr<T>() + o * chunk;
        std::copy(src, src + chunk, yp + o * total_len * inner + offset);
        offset += chunk;
      }
    }
    if (detail::should_record(parts)) {
      detail::record(out, "concat", parts, [impls, lens, outer, inner, total_len](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        for (std::int64_t ou = 0; ou < outer; ++ou) {
          std::int64_t offset = 0;
          for (std::size_t k = 0; k < impls.size(); ++k) {
            const std::int64_t chunk = lens[k] * inner;
            if (impls[k]->requires_grad) {
              T* dst = impls[k]->template grad_ptr<T>() + ou * chunk;
              const T* src = g + ou * total_len * inner + offset;
              for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
            offset += chunk;
          }
        }
      });
    }
  });
  return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw DimensionError("slice: axis out of range");
  if (start < 0 || length < 0 || start + length > x.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  const std::int64_t full = x.dim(axis);
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = length;
  Tensor out = detail::make_tensor(shape, x.dtype());
  dispatch(x.dtype(), [&]<class T>() {
    auto xi = x.impl();
    const T* xp = xi->template ptr<T>();
    T* yp = out.impl()->template ptr<T>();
    for (std::int64_t o = 0; o < outer; ++o) {
      const T* src = xp + (o * full + start) * inner;
      std::copy(src, src + length * inner, yp + o * length * inner);
    }
    if (detail::should_record({&x})) {
      detail::record(out, "slice", {x}, [xi, outer, inner, full, start, length](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        for (std::int64_t ou = 0; ou < outer; ++ou) {
          T* dst = gx + (ou * full + start) * inner;
          const T* src = g + ou * length * inner;
          for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
        }
      });
    }
  });
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  Tensor out = detail::make_tensor(shape, x.dtype());
  out.impl()->data = x.impl()->data;
  if (detail::should_record({&x})) {
    dispatch(x.dtype(), [&]<class T>() {
      auto xi = x.impl();
      detail::record(out, "reshape", {x}, [xi](TensorImpl& o) {
        const T* g = o.template grad_cptr<T>();
        T* gx = xi->template grad_ptr<T>();
        const std::int64_t n = o.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
      });
    });
  }
  return out;
}

}  // namespace aio
