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

// Internal representation shared by the tensor and op translation units.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "aio/errors.hpp"
#include "aio/tensor.hpp"

namespace aio {

// Storage aligned to the widest SIMD packet so Eigen kernels see the same
// alignment, and therefore the same summation order, on every allocation.
template <class T>
using AlignedVec = std::vector<T, Eigen::aligned_allocator<T>>;

using Buffer = std::variant<AlignedVec<float>, AlignedVec<double>>;

struct Node;

struct TensorImpl {
  Shape shape;
  Buffer data;
  std::optional<Buffer> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;

  DType dtype() const { return data.index() == 0 ? DType::f32 : DType::f64; }

  template <class T>
  AlignedVec<T>& vec() {
    return std::get<AlignedVec<T>>(data);
  }
  template <class T>
  const AlignedVec<T>& vec() const {
    return std::get<AlignedVec<T>>(data);
  }
  template <class T>
  T* ptr() {
    return vec<T>().data();
  }
  template <class T>
  const T* ptr() const {
    return vec<T>().data();
  }

  /// Gradient buffer, allocated zero-filled on first use.
  template <class T>
  T* grad_ptr() {
    if (!grad) grad = Buffer(AlignedVec<T>(vec<T>().size(), T(0)));
    return std::get<AlignedVec<T>>(*grad).data();
  }
  template <class T>
  const T* grad_cptr() const {
    return std::get<AlignedVec<T>>(*grad).data();
  }
  std::int64_t numel() const { return shape_numel(shape); }
};

using BackwardFn = std::function<void(TensorImpl& out)>;

struct Node {
  std::string name;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
  bool released = false;
};

Buffer make_buffer(DType dtype, std::size_t n);

/// Calls `f.template operator()<T>()` with T = float or double.
template <class F>
decltype(auto) dispatch(DType dtype, F&& f) {
  if (dtype == DType::f32) return f.template operator()<float>();
  return f.template operator()<double>();
}

namespace detail {

/// Fresh zero-filled tensor.
Tensor make_tensor(Shape shape, DType dtype);

/// True when an op over `inputs` must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

/// Records `out` as produced by op `name` from `inputs`.
void record(Tensor& out, std::string name, std::vector<Tensor> inputs, BackwardFn fn);

inline bool needs_grad(const std::shared_ptr<TensorImpl>& t) { return t && t->requires_grad; }

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op);

/// Hook for the gradient checker: non-smooth ops report which branch each
/// element took so finite differences that straddle a kink can be detected.
bool branch_recording();
void record_branch(std::uint64_t digest);
void set_branch_sink(std::uint64_t* sink);

inline std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace detail
}  // namespace aio
