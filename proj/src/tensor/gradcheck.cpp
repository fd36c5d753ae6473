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

#include "aio/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "impl.hpp"

namespace aio {

namespace {

class BranchSink {
 public:
  BranchSink() { detail::set_branch_sink(&digest_); }
  ~BranchSink() { detail::set_branch_sink(nullptr); }
  BranchSink(const BranchSink&) = delete;
  BranchSink& operator=(const BranchSink&) = delete;
  std::uint64_t digest() const { return digest_; }

 private:
  std::uint64_t digest_ = 0;
};

struct Probe {
  double value;
  std::uint64_t branches;
};

Probe evaluate(const GraphBuilder& build, const std::vector<Tensor>& inputs) {
  NoGradGuard no_grad;
  BranchSink sink;
  Tensor out = build(inputs);
  return {out.item(), sink.digest()};
}

}  // namespace

bool GradCheckReport::passed(double tolerance) const {
  const std::size_t total = checked + skipped_nonsmooth;
  return nonfinite_op.empty() && checked > 0 && max_rel_error < tolerance && skipped_nonsmooth * 10 <= total;
}

GradCheckReport grad_check(const GraphBuilder& build, const std::vector<Tensor>& inputs, double eps,
                           std::string name, double abs_floor) {
  GradCheckReport report;
  report.name = std::move(name);
  for (const auto& t : inputs) {
    if (t.dtype() != DType::f64) throw ContractError("grad_check requires 64-bit inputs");
    if (!t.is_leaf()) throw ContractError("grad_check inputs must be leaf tensors");
  }

  std::vector<Tensor> leaves = inputs;
  for (auto& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::uint64_t base_branches = 0;
  {
    BranchSink sink;
    Tensor out = build(leaves);
    base_branches = sink.digest();
    if (out.numel() != 1) throw ContractError("grad_check: builder must return a scalar");
    if (!all_finite(out) || !first_nonfinite_op(out).empty()) {
      report.nonfinite_op = first_nonfinite_op(out);
      if (report.nonfinite_op.empty()) report.nonfinite_op = "<leaf>";
      return report;
    }
    backward(out);
  }

  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Tensor& t = leaves[i];
    const std::vector<double> analytic =
        t.has_grad() ? t.grad_vector() : std::vector<double>(static_cast<std::size_t>(t.numel()), 0.0);
    auto values = t.mutable_data<double>();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + eps;
      const Probe plus = evaluate(build, leaves);
      values[j] = saved - eps;
      const Probe minus = evaluate(build, leaves);
      values[j] = saved;
      if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
        values[j] = saved;
        report.nonfinite_op = "<perturbed forward>";
        return report;
      }
      if (plus.branches != base_branches || minus.branches != base_branches) {
        ++report.skipped_nonsmooth;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * eps);
      const double a = analytic[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        std::ostringstream os;
        os.precision(10);
        os << "input " << i << " element " << j << ": analytic " << a << " numeric " << numeric;
        report.worst = os.str();
      }
    }
    t.zero_grad();
  }
  return report;
}

}  // namespace aio
