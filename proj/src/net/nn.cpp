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

#include "aio/nn.hpp"

#include <cmath>

#include "aio/errors.hpp"
#include "aio/ops.hpp"

namespace aio {

Tensor ParamStore::add(const std::string& name, Tensor t, ParamGroup group) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  params_.push_back({name, t, group});
  return t;
}

Tensor ParamStore::uniform(const std::string& name, Shape shape, double bound, ParamGroup group) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : values) v = dist(rng_);
  return add(name, Tensor::from_vector(std::move(shape), values), group);
}

Tensor ParamStore::constant(const std::string& name, Shape shape, double value, ParamGroup group) {
  return add(name, Tensor::full(std::move(shape), value), group);
}

const NamedParam* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::int64_t ParamStore::count(ParamGroup group) const {
  std::int64_t n = 0;
  for (const auto& p : params_) {
    if (p.group == group) n += p.tensor.numel();
  }
  return n;
}

std::int64_t ParamStore::count() const { return count(ParamGroup::main) + count(ParamGroup::alignment); }

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

Conv2d make_conv(ParamStore& store, const std::string& name, std::int64_t c_in, std::int64_t c_out, int k,
                 int stride, ParamGroup group) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
  Conv2d conv;
  conv.weight = store.uniform(name + ".weight", {c_out, c_in, k, k}, bound, group);
  conv.bias = store.uniform(name + ".bias", {c_out}, bound, group);
  conv.stride = stride;
  conv.padding = k / 2;
  return conv;
}

Tensor ResidualUnit::operator()(const Tensor& x) const {
  Tensor y = conv2(relu(conv1(x)));
  Tensor shortcut = has_projection ? projection(x) : x;
  return relu(add(shortcut, y));
}

ResidualUnit make_residual_unit(ParamStore& store, const std::string& name, std::int64_t c_in, std::int64_t c_out,
                                int stride) {
  ResidualUnit unit;
  unit.conv1 = make_conv(store, name + ".conv1", c_in, c_out, 3, stride);
  unit.conv2 = make_conv(store, name + ".conv2", c_out, c_out, 3, 1);
  if (stride != 1 || c_in != c_out) {
    unit.has_projection = true;
    unit.projection = make_conv(store, name + ".proj", c_in, c_out, 1, stride);
  }
  return unit;
}

}  // namespace aio
