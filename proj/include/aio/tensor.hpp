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
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aio {

enum class DType { f32, f64 };

const char* dtype_name(DType dtype);

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Thread-local dtype used by tensor factories when none is given. Training
/// runs in f32; gradient checks switch to f64 with a DTypeScope.
DType default_dtype();

class DTypeScope {
 public:
  explicit DTypeScope(DType dtype);
  ~DTypeScope();
  DTypeScope(const DTypeScope&) = delete;
  DTypeScope& operator=(const DTypeScope&) = delete;

 private:
  DType previous_;
};

/// Thread-local switch; when disabled, ops record no graph.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct TensorImpl;

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a reference-counted handle: copies of a handle denote the same
/// tensor (same parameters, same gradient slot). Distinct tensors never share a
/// data buffer; every op, detach() and clone() allocate fresh storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = default_dtype());
  static Tensor full(Shape shape, double value, DType dtype = default_dtype());
  static Tensor from_vector(Shape shape, std::span<const double> values,
                            DType dtype = default_dtype());
  static Tensor from_vector(Shape shape, std::initializer_list<double> values,
                            DType dtype = default_dtype());
  static Tensor from_floats(Shape shape, std::vector<float> values);
  static Tensor from_doubles(Shape shape, std::vector<double> values);
  static Tensor scalar(double value, DType dtype = default_dtype());

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int ndim() const;
  std::int64_t numel() const;
  DType dtype() const;

  template <class T>
  std::span<const T> data() const;
  /// Writable view. Refused on tensors produced by a recorded op, since
  /// their backward rules may depend on the stored values.
  template <class T>
  std::span<T> mutable_data();

  std::vector<double> to_vector() const;
  double item() const;
  double at(std::initializer_list<std::int64_t> index) const;
  void set(std::initializer_list<std::int64_t> index, double value);
  void fill(double value);
  /// Overwrite every element from `values` (converted to this dtype).
  void assign(std::span<const double> values);
  void copy_from(const Tensor& other);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  /// Detached copy of the accumulated gradient. Throws if absent.
  Tensor grad() const;
  std::vector<double> grad_vector() const;
  void zero_grad();
  bool is_leaf() const;

  Tensor detach() const;
  Tensor clone() const { return detach(); }
  Tensor to(DType dtype) const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

  std::shared_ptr<TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Reverse-mode pass from a scalar loss. Gradients accumulate on every leaf
/// with requires_grad; intermediate gradients are discarded. The recorded graph
/// is released afterwards, so a second call without a new forward throws
/// GraphError.
void backward(const Tensor& loss);

/// Names of the recorded ops reachable from `root`, in topological order.
std::vector<std::string> graph_op_names(const Tensor& root);

/// First recorded op (topological order) whose output holds a NaN or Inf, or
/// an empty string when every value is finite.
std::string first_nonfinite_op(const Tensor& root);

bool all_finite(const Tensor& t);

}  // namespace aio
