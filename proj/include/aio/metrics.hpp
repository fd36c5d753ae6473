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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aio/tensor.hpp"

namespace aio {

constexpr std::array<double, 4> kBadThresholds{0.5, 1.0, 2.0, 3.0};

struct MetricsReport {
  std::string id;
  std::int64_t n_valid = 0;
  double epe = 0.0;  // mean |pred - gt|; identical to avgerr
  std::array<double, 4> bad{};  // percent with error > kBadThresholds[i]
  double avgerr = 0.0;
  double a90 = 0.0;
  double d1 = 0.0;  // percent with error > 3 and > 0.05 gt
  std::vector<double> errors;  // per-pixel errors, kept for pooled A90
};

/// Percentile `q` in [0,1] with linear interpolation between order
/// statistics: position q (n-1) in the sorted sample. Throws
/// EmptyReductionError on an empty sample.
double percentile(std::vector<double> values, double q);

/// Over pixels with valid != 0. Throws EmptyReductionError when none are
/// valid and DimensionError on shape mismatch.
MetricsReport evaluate(const Tensor& pred, const Tensor& gt, const Tensor& valid, std::string id = {});

/// Pixel-weighted means of `reports`. A90 comes from the pooled errors when
/// `pooled_a90`, otherwise it is the n_valid-weighted mean of per-image A90.
MetricsReport aggregate(const std::vector<MetricsReport>& reports, bool pooled_a90 = true, std::string id = "ALL");

/// "id,n_valid,epe,bad0.5,bad1.0,bad2.0,bad3.0,avgerr,a90,d1"
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r);

}  // namespace aio
