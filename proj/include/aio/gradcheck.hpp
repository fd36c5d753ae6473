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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "aio/tensor.hpp"

namespace aio {

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Elements whose +/-eps probes crossed a non-differentiable point (a relu
  /// hinge, a top-k swap, ...). Central differences are meaningless there, so
  /// they are excluded from max_rel_error.
  std::size_t skipped_nonsmooth = 0;
  std::string worst;         // "input <i> element <j>: analytic a numeric n"
  std::string nonfinite_op;  // set when the forward produced NaN/Inf

  bool passed(double tolerance) const;
};

using GraphBuilder = std::function<Tensor(const std::vector<Tensor>& inputs)>;

/// Compares backward() against central differences (f(x+eps)-f(x-eps))/(2eps)
/// for every element of every input, using the relative error
/// |a-n| / max(|a|, |n|, abs_floor). Inputs must be f64 leaves; they are perturbed
/// in place and restored, so model parameters can be passed directly.
GradCheckReport grad_check(const GraphBuilder& build, const std::vector<Tensor>& inputs, double eps = 1e-4,
                           std::string name = {}, double abs_floor = 1e-8);

}  // namespace aio
