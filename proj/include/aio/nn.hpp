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
#include <random>
#include <string>
#include <vector>

#include "aio/tensor.hpp"

namespace aio {

/// Optimizer parameter groups. Alignment networks get their own learning-rate
/// policy; everything else is `main`.
enum class ParamGroup { main, alignment };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamGroup group;
};

/// Ordered registry of trainable tensors. Registration order fixes both the
/// initialisation stream and the checkpoint layout.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// New parameter drawn from U(-bound, bound).
  Tensor uniform(const std::string& name, Shape shape, double bound, ParamGroup group);
  Tensor constant(const std::string& name, Shape shape, double value, ParamGroup group);

  const std::vector<NamedParam>& params() const { return params_; }
  const NamedParam* find(const std::string& name) const;
  std::int64_t count(ParamGroup group) const;
  std::int64_t count() const;
  void zero_grad();

 private:
  Tensor add(const std::string& name, Tensor t, ParamGroup group);

  std::mt19937_64 rng_;
  std::vector<NamedParam> params_;
};

struct Conv2d {
  Tensor weight;  // [C_out, C_in, k, k]
  Tensor bias;    // [C_out]
  int stride = 1;
  int padding = 0;

  Tensor operator()(const Tensor& x) const;
  std::int64_t num_params() const { return weight.numel() + bias.numel(); }
  std::int64_t out_channels() const { return weight.dim(0); }
};

/// k x k conv with "same" padding, weights and bias from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Conv2d make_conv(ParamStore& store, const std::string& name, std::int64_t c_in, std::int64_t c_out, int k,
                 int stride = 1, ParamGroup group = ParamGroup::main);

/// relu(shortcut(x) + conv2(relu(conv1(x)))). The shortcut is a strided 1x1
/// projection when the shape changes, identity otherwise.
struct ResidualUnit {
  Conv2d conv1;
  Conv2d conv2;
  bool has_projection = false;
  Conv2d projection;

  Tensor operator()(const Tensor& x) const;
};

ResidualUnit make_residual_unit(ParamStore& store, const std::string& name, std::int64_t c_in, std::int64_t c_out,
                                int stride);

}  // namespace aio
