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
#include <sstream>
#include <unordered_set>

#include "impl.hpp"

namespace aio {

namespace {

thread_local DType g_default_dtype = DType::f32;
thread_local bool g_grad_enabled = true;
thread_local std::uint64_t* g_branch_sink = nullptr;

TensorImpl& checked(const std::shared_ptr<TensorImpl>& impl) {
  if (!impl) throw ContractError("operation on an undefined tensor");
  return *impl;
}

std::int64_t flat_index(const Shape& shape, std::initializer_list<std::int64_t> index) {
  if (index.size() != shape.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                         std::to_string(shape.size()));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i < 0 || i >= shape[axis]) {
      throw DimensionError("index " + std::to_string(i) + " out of range on axis " + std::to_string(axis));
    }
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}

// Post-order DFS over the recorded graph; the result is a topological order.
std::vector<TensorImpl*> topo_order(TensorImpl* root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& fn = node->grad_fn;
    if (fn && next < fn->inputs.size()) {
      TensorImpl* child = fn->inputs[next++].get();
      if (child && child->grad_fn && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  return order;
}

}  // namespace

const char* dtype_name(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

DType default_dtype() { return g_default_dtype; }
DTypeScope::DTypeScope(DType dtype) : previous_(g_default_dtype) { g_default_dtype = dtype; }
DTypeScope::~DTypeScope() { g_default_dtype = previous_; }

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Buffer make_buffer(DType dtype, std::size_t n) {
  if (dtype == DType::f32) return Buffer(AlignedVec<float>(n, 0.0f));
  return Buffer(AlignedVec<double>(n, 0.0));
}

namespace detail {

Tensor make_tensor(Shape shape, DType dtype) {
  for (auto d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->data = make_buffer(dtype, static_cast<std::size_t>(shape_numel(shape)));
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.defined() && t.requires_grad(); });
}

void record(Tensor& out, std::string name, std::vector<Tensor> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->name = std::move(name);
  for (auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(fn);
  auto impl = out.impl();
  impl->requires_grad = true;
  impl->grad_fn = std::move(node);
}

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw ContractError(std::string(op) + ": dtype mismatch " + dtype_name(a.dtype()) + " vs " +
                        dtype_name(b.dtype()));
  }
}

bool branch_recording() { return g_branch_sink != nullptr; }

void record_branch(std::uint64_t digest) {
  if (g_branch_sink) *g_branch_sink = mix_hash(*g_branch_sink, digest);
}

void set_branch_sink(std::uint64_t* sink) { g_branch_sink = sink; }

}  // namespace detail

Tensor Tensor::zeros(Shape shape, DType dtype) { return detail::make_tensor(std::move(shape), dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t = detail::make_tensor(std::move(shape), dtype);
  t.fill(value);
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::span<const double> values, DType dtype) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("from_vector: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  Tensor t = detail::make_tensor(std::move(shape), dtype);
  t.assign(values);
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::initializer_list<double> values, DType dtype) {
  return from_vector(std::move(shape), std::span<const double>(values.begin(), values.size()), dtype);
}

Tensor Tensor::from_floats(Shape shape, std::vector<float> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("from_floats: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = Buffer(AlignedVec<std::decay_t<decltype(values[0])>>(values.begin(), values.end()));
  return Tensor(std::move(impl));
}

Tensor Tensor::from_doubles(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("from_doubles: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = Buffer(AlignedVec<std::decay_t<decltype(values[0])>>(values.begin(), values.end()));
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, DType dtype) { return full({}, value, dtype); }

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  int n = static_cast<int>(s.size());
  if (axis < 0) axis += n;
  if (axis < 0 || axis >= n) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }
std::int64_t Tensor::numel() const { return shape_numel(shape()); }
DType Tensor::dtype() const { return checked(impl_).dtype(); }

template <class T>
std::span<const T> Tensor::data() const {
  auto& impl = checked(impl_);
  if (!std::holds_alternative<AlignedVec<T>>(impl.data)) {
    throw ContractError(std::string("data<T>() requested with the wrong dtype; tensor is ") +
                        dtype_name(impl.dtype()));
  }
  const auto& v = impl.vec<T>();
  return {v.data(), v.size()};
}

template <class T>
std::span<T> Tensor::mutable_data() {
  auto& impl = checked(impl_);
  if (impl.grad_fn) throw GraphError("cannot mutate a tensor produced by a recorded op");
  if (!std::holds_alternative<AlignedVec<T>>(impl.data)) {
    throw ContractError(std::string("mutable_data<T>() requested with the wrong dtype; tensor is ") +
                        dtype_name(impl.dtype()));
  }
  auto& v = impl.vec<T>();
  return {v.data(), v.size()};
}

template std::span<const float> Tensor::data<float>() const;
template std::span<const double> Tensor::data<double>() const;
template std::span<float> Tensor::mutable_data<float>();
template std::span<double> Tensor::mutable_data<double>();

std::vector<double> Tensor::to_vector() const {
  auto& impl = checked(impl_);
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, impl.data);
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return std::visit([](const auto& v) { return static_cast<double>(v[0]); }, impl_->data);
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  auto flat = static_cast<std::size_t>(flat_index(shape(), index));
  return std::visit([flat](const auto& v) { return static_cast<double>(v[flat]); }, impl_->data);
}

void Tensor::set(std::initializer_list<std::int64_t> index, double value) {
  auto flat = static_cast<std::size_t>(flat_index(shape(), index));
  if (impl_->grad_fn) throw GraphError("cannot mutate a tensor produced by a recorded op");
  std::visit([&](auto& v) { v[flat] = static_cast<typename std::decay_t<decltype(v)>::value_type>(value); },
             impl_->data);
}

void Tensor::fill(double value) {
  auto& impl = checked(impl_);
  if (impl.grad_fn) throw GraphError("cannot mutate a tensor produced by a recorded op");
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        std::fill(v.begin(), v.end(), static_cast<T>(value));
      },
      impl.data);
}

void Tensor::assign(std::span<const double> values) {
  auto& impl = checked(impl_);
  if (impl.grad_fn) throw GraphError("cannot mutate a tensor produced by a recorded op");
  if (static_cast<std::int64_t>(values.size()) != impl.numel()) {
    throw DimensionError("assign: expected " + std::to_string(impl.numel()) + " values, got " +
                         std::to_string(values.size()));
  }
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(values[i]);
      },
      impl.data);
}

void Tensor::copy_from(const Tensor& other) {
  if (other.shape() != shape()) {
    throw DimensionError("copy_from: shape " + shape_str(other.shape()) + " vs " + shape_str(shape()));
  }
  if (impl_->grad_fn) throw GraphError("cannot mutate a tensor produced by a recorded op");
  if (other.dtype() == dtype()) {
    impl_->data = other.impl_->data;
  } else {
    auto v = other.to_vector();
    assign(v);
  }
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  auto& impl = checked(impl_);
  if (impl.grad_fn && !flag) throw GraphError("cannot clear requires_grad on a recorded op output");
  impl.requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return checked(impl_).grad.has_value(); }

Tensor Tensor::grad() const {
  auto& impl = checked(impl_);
  if (!impl.grad) throw ContractError("tensor has no gradient");
  auto g = std::make_shared<TensorImpl>();
  g->shape = impl.shape;
  g->data = *impl.grad;
  return Tensor(std::move(g));
}

std::vector<double> Tensor::grad_vector() const { return grad().to_vector(); }

void Tensor::zero_grad() { checked(impl_).grad.reset(); }

bool Tensor::is_leaf() const { return checked(impl_).grad_fn == nullptr; }

Tensor Tensor::detach() const {
  auto& impl = checked(impl_);
  auto copy = std::make_shared<TensorImpl>();
  copy->shape = impl.shape;
  copy->data = impl.data;
  return Tensor(std::move(copy));
}

Tensor Tensor::to(DType dtype) const {
  if (dtype == this->dtype()) return detach();
  auto v = to_vector();
  return from_vector(shape(), v, dtype);
}

bool all_finite(const Tensor& t) {
  return std::visit(
      [](const auto& v) {
        return std::all_of(v.begin(), v.end(), [](auto x) { return std::isfinite(x); });
      },
      t.impl()->data);
}

void backward(const Tensor& loss) {
  auto root = loss.impl();
  if (!root) throw ContractError("backward on an undefined tensor");
  if (root->numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(root->shape));
  }
  if (!root->requires_grad) throw ContractError("backward on a tensor that does not require grad");

  auto order = topo_order(root.get());
  for (TensorImpl* t : order) {
    if (t->grad_fn && t->grad_fn->released) {
      throw GraphError("backward called twice on op '" + t->grad_fn->name +
                       "'; the graph was released by the first call");
    }
  }

  // Seed d(loss)/d(loss) = 1.
  dispatch(root->dtype(), [&]<class T>() { root->grad_ptr<T>()[0] += T(1); });

  // Nodes are released only after the sweep: dropping a node's inputs can free
  // tensors that are still ahead in `order`.
  std::vector<std::shared_ptr<Node>> done;
  done.reserve(order.size());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    auto fn = t->grad_fn;
    if (!fn) continue;
    if (t->grad) fn->backward(*t);
    t->grad.reset();
    done.push_back(std::move(fn));
  }
  for (auto& fn : done) {
    fn->backward = nullptr;
    fn->inputs.clear();
    fn->released = true;
  }
}

std::vector<std::string> graph_op_names(const Tensor& root) {
  std::vector<std::string> names;
  if (!root.defined() || !root.impl()->grad_fn) return names;
  for (TensorImpl* t : topo_order(root.impl().get())) {
    if (t->grad_fn) names.push_back(t->grad_fn->name);
  }
  return names;
}

std::string first_nonfinite_op(const Tensor& root) {
  if (!root.defined() || !root.impl()->grad_fn) return {};
  for (TensorImpl* t : topo_order(root.impl().get())) {
    if (!t->grad_fn) continue;
    bool finite = std::visit(
        [](const auto& v) { return std::all_of(v.begin(), v.end(), [](auto x) { return std::isfinite(x); }); },
        t->data);
    if (!finite) return t->grad_fn->name;
  }
  return {};
}

}  // namespace aio
