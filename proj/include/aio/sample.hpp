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
#include <string>

#include "aio/tensor.hpp"

namespace aio {

/// Rectified stereo pair with dense ground truth.
struct StereoSample {
  std::string id;
  Tensor left;          // [3,H,W], values in [0,1]
  Tensor right;         // [3,H,W]
  Tensor gt_disparity;  // [H,W], pixels; may be undefined for inference-only data
  Tensor valid;         // [H,W], 0 or 1

  std::int64_t height() const { return left.dim(1); }
  std::int64_t width() const { return left.dim(2); }

  /// Throws ContractError unless both images are [3,H,W] with H and W
  /// multiples of 4 and the ground-truth maps (when present) are [H,W].
  void validate() const;
};

}  // namespace aio
