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

#include "aio/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "aio/errors.hpp"

namespace aio {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyReductionError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

MetricsReport evaluate(const Tensor& pred, const Tensor& gt, const Tensor& valid, std::string id) {
  if (pred.shape() != gt.shape() || pred.shape() != valid.shape())
    throw DimensionError("evaluate: pred " + shape_str(pred.shape()) + ", gt " + shape_str(gt.shape()) + ", valid " +
                         shape_str(valid.shape()) + " must match");
  const auto p = pred.to_vector(), g = gt.to_vector(), v = valid.to_vector();
  MetricsReport r;
  r.id = std::move(id);
  double sum = 0.0;
  std::array<std::int64_t, 4> bad{};
  std::int64_t d1 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (v[i] == 0.0) continue;
    const double e = std::abs(p[i] - g[i]);
    r.errors.push_back(e);
    sum += e;
    for (std::size_t t = 0; t < kBadThresholds.size(); ++t) bad[t] += e > kBadThresholds[t];
    d1 += e > 3.0 && e > 0.05 * g[i];
  }
  r.n_valid = static_cast<std::int64_t>(r.errors.size());
  if (r.n_valid == 0) throw EmptyReductionError("evaluate: no valid pixels" + (r.id.empty() ? "" : " in '" + r.id + "'"));
  const double n = static_cast<double>(r.n_valid);
  r.epe = r.avgerr = sum / n;
  for (std::size_t t = 0; t < bad.size(); ++t) r.bad[t] = 100.0 * static_cast<double>(bad[t]) / n;
  r.d1 = 100.0 * static_cast<double>(d1) / n;
  r.a90 = percentile(r.errors, 0.9);
  return r;
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports, bool pooled_a90, std::string id) {
  if (reports.empty()) throw EmptyReductionError("aggregate of zero reports");
  MetricsReport out;
  out.id = std::move(id);
  double epe = 0.0, d1 = 0.0, a90 = 0.0;
  std::array<double, 4> bad{};
  for (const auto& r : reports) {
    const double w = static_cast<double>(r.n_valid);
    out.n_valid += r.n_valid;
    epe += w * r.epe;
    d1 += w * r.d1;
    a90 += w * r.a90;
    for (std::size_t t = 0; t < bad.size(); ++t) bad[t] += w * r.bad[t];
    out.errors.insert(out.errors.end(), r.errors.begin(), r.errors.end());
  }
  if (out.n_valid == 0) throw EmptyReductionError("aggregate over reports with no valid pixels");
  const double n = static_cast<double>(out.n_valid);
  out.epe = out.avgerr = epe / n;
  out.d1 = d1 / n;
  for (std::size_t t = 0; t < bad.size(); ++t) out.bad[t] = bad[t] / n;
  out.a90 = pooled_a90 ? percentile(out.errors, 0.9) : a90 / n;
  return out;
}

std::string metrics_csv_header() { return "id,n_valid,epe,bad0.5,bad1.0,bad2.0,bad3.0,avgerr,a90,d1"; }

std::string metrics_csv_row(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, ",%lld,%.6f,%.4f,%.4f,%.4f,%.4f,%.6f,%.6f,%.4f", static_cast<long long>(r.n_valid),
                r.epe, r.bad[0], r.bad[1], r.bad[2], r.bad[3], r.avgerr, r.a90, r.d1);
  return r.id + buf;
}

}  // namespace aio
