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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "aio/config.hpp"
#include "aio/gradcheck.hpp"
#include "aio/image_io.hpp"
#include "aio/metrics.hpp"
#include "aio/sample.hpp"

namespace aio {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Generates the dataset; prints the manifest paths. A no-op when the
/// manifests already exist unless `force`.
int cmd_gen_data(const RunConfig& cfg, bool force, std::ostream& out);

int cmd_train(const RunConfig& cfg, std::ostream& out);

using Predictor = std::function<Tensor(const StereoSample&)>;

/// Worker count for evaluation: AIO_STEREO_THREADS when set (>= 1),
/// otherwise the hardware concurrency.
unsigned eval_threads();

/// Evaluates `predict` over every manifest entry, in parallel, keeping
/// manifest order in the result.
std::vector<MetricsReport> evaluate_manifest(const std::filesystem::path& manifest, const Predictor& predict,
                                             unsigned threads);

/// Per-image rows followed by the aggregate row "ALL".
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports,
                       const MetricsReport& all);

struct EvalRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  EvalConfig eval;
  /// When set, the checkpoint's model hash must match this config.
  const ModelConfig* expected_model = nullptr;
};

/// Writes <output_dir>/metrics.csv and, when rendering, <output_dir>/disp/<id>.{pfm,pgm}.
/// Throws ContractError when the checkpoint does not fit the request.
MetricsReport cmd_eval(const EvalRequest& req, std::ostream& out);

/// Writes gates_block<i>_<teacher>.pgm (min-max normalised, constant maps
/// at 128) and the raw values as gates_block<i>_<teacher>.pfm. Returns the
/// written PGM paths.
std::vector<std::filesystem::path> cmd_export_gates(const std::filesystem::path& checkpoint,
                                                    const StereoSample& sample,
                                                    const std::filesystem::path& output_dir);

/// Min-max normalisation of an [H,W] map to 0..255; constant maps become 128.
Gray8 normalize_gate_map(const Tensor& map);

struct GradcheckEntry {
  GradCheckReport report;
  double tolerance = 0.0;
  bool passed() const { return report.passed(tolerance); }
};

/// Every differentiable op (three seeds each) plus the composite blocks.
/// `inject_fault` names a deliberately wrong op to add to the suite
/// ("bad_backward"); empty for a normal run.
std::vector<GradcheckEntry> run_gradcheck_suite(const std::string& inject_fault = {});

/// Prints one line per check and returns kExitOk when all pass.
int cmd_gradcheck(std::ostream& out, const std::string& inject_fault = {});

}  // namespace aio
