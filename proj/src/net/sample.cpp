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

#include "aio/sample.hpp"

#include "aio/errors.hpp"

namespace aio {

void StereoSample::validate() const {
  auto check_image = [](const Tensor& t, const char* name) {
    if (!t.defined()) throw ContractError(std::string(name) + " image is missing");
    if (t.ndim() != 3 || t.dim(0) != 3)
      throw ContractError(std::string(name) + " image must be [3,H,W], got " + shape_str(t.shape()));
  };
  check_image(left, "left");
  check_image(right, "right");
  if (left.shape() != right.shape())
    throw ContractError("left " + shape_str(left.shape()) + " and right " + shape_str(right.shape()) +
                        " images differ in shape");
  if (height() % 4 != 0 || width() % 4 != 0)
    throw ContractError("image size " + std::to_string(height()) + "x" + std::to_string(width()) +
                        " is not a multiple of 4");
  const Shape hw{height(), width()};
  if (gt_disparity.defined() && gt_disparity.shape() != hw)
    throw ContractError("ground truth " + shape_str(gt_disparity.shape()) + " does not match " + shape_str(hw));
  if (valid.defined() && valid.shape() != hw)
    throw ContractError("valid mask " + shape_str(valid.shape()) + " does not match " + shape_str(hw));
}

}  // namespace aio
