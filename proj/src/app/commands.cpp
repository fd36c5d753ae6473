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

#include "aio/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "aio/data_gen.hpp"
#include "aio/errors.hpp"
#include "aio/ops.hpp"
#include "aio/trainer.hpp"

namespace aio {

namespace fs = std::filesystem;

int cmd_gen_data(const RunConfig& cfg, bool force, std::ostream& out) {
  const DatasetPaths p = build_dataset(cfg.data, force);
  out << (p.generated ? "generated " : "kept existing ") << "dataset (" << cfg.data.num_train << " train, "
      << cfg.data.num_val << " val)\n"
      << p.train.string() << "\n"
      << p.val.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const TrainResult r = train(cfg, [&](std::int64_t step, std::int64_t total, double loss, double val) {
    if (!std::isnan(val)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "step %lld/%lld  L_AIO %.5f  val_epe %.4f\n", static_cast<long long>(step + 1),
                    static_cast<long long>(total), loss, val);
      out << buf << std::flush;
    }
  });
  char buf[160];
  std::snprintf(buf, sizeof buf, "val EPE %.4f -> %.4f after %lld steps\n", r.initial_val_epe, r.final_val_epe,
                static_cast<long long>(r.steps));
  out << buf << r.checkpoint.string() << "\n" << r.log.string() << "\n";
  return kExitOk;
}

unsigned eval_threads() {
  if (const char* env = std::getenv("AIO_STEREO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<MetricsReport> evaluate_manifest(const fs::path& manifest, const Predictor& predict, unsigned threads) {
  const DatasetManifest m = read_manifest(manifest);
  std::vector<MetricsReport> reports(m.items.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    NoGradGuard no_grad;
    for (std::size_t i = next++; i < m.items.size(); i = next++) {
      try {
        const StereoSample s = load_sample(m.items[i]);
        reports[i] = evaluate(predict(s), s.gt_disparity, s.valid, s.id);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, m.items.size()))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return reports;
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsReport>& reports, const MetricsReport& all) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << metrics_csv_header() << "\n";
  for (const auto& r : reports) out << metrics_csv_row(r) << "\n";
  out << metrics_csv_row(all) << "\n";
}

MetricsReport cmd_eval(const EvalRequest& req, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(req.checkpoint);
  if (req.expected_model && ck.config_hash != model_config_hash(*req.expected_model))
    throw ContractError("checkpoint '" + req.checkpoint.string() +
                        "' was trained with a different model configuration (config hash mismatch)");
  const auto model = model_from_checkpoint(ck);
  const DatasetManifest m = read_manifest(req.manifest);
  for (const auto& it : m.items) {
    const StereoSample s = load_sample(it);
    if (model->config().max_disparity > s.width() / 4)
      throw ContractError("manifest image '" + it.id + "' is " + std::to_string(s.width()) +
                          " px wide, too narrow for the checkpoint's disparity range " +
                          std::to_string(model->config().max_disparity));
    break;
  }

  const int iters = model->config().eval_iters;
  const fs::path disp_dir = req.output_dir / "disp";
  const double vmax = 4.0 * static_cast<double>(model->config().max_disparity);
  Predictor predict = [&](const StereoSample& s) {
    Tensor pred = model->forward(s, nullptr, iters).predictions.back();
    if (req.eval.render) {
      write_pfm(disp_dir / (s.id + ".pfm"), pred);
      write_pgm(disp_dir / (s.id + ".pgm"), quantize_unit(scale(pred, 1.0 / vmax)));
    }
    return pred;
  };
  if (req.eval.render) fs::create_directories(disp_dir);
  const auto reports = evaluate_manifest(req.manifest, predict, eval_threads());
  const MetricsReport all = aggregate(reports, req.eval.pooled_a90);
  const fs::path csv = req.output_dir / "metrics.csv";
  write_metrics_csv(csv, reports, all);
  out << metrics_csv_header() << "\n" << metrics_csv_row(all) << "\n" << csv.string() << "\n";
  return all;
}

Gray8 normalize_gate_map(const Tensor& map) {
  if (map.ndim() != 2) throw DimensionError("gate map must be [H,W], got " + shape_str(map.shape()));
  const auto v = map.to_vector();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  Gray8 img{map.dim(0), map.dim(1), std::vector<std::uint8_t>(v.size(), 128)};
  if (*hi > *lo)
    for (std::size_t i = 0; i < v.size(); ++i)
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - *lo) / (*hi - *lo)));
  return img;
}

std::vector<fs::path> cmd_export_gates(const fs::path& checkpoint, const StereoSample& sample,
                                       const fs::path& output_dir) {
  const auto model = model_from_checkpoint(load_checkpoint(checkpoint));
  NoGradGuard no_grad;
  sample.validate();
  const ContextResult ctx = context_forward(sample.left, model->context(), model->config(), model->ablation(), nullptr);
  fs::create_directories(output_dir);
  std::vector<fs::path> written;
  for (int i = 0; i < kNumStages; ++i) {
    const BlockOutputs& bo = ctx.aux.blocks[i];
    const DlsktBlock& b = model->context().blocks[i];
    // Arms without fused gates still export what the gating network computes.
    const Tensor g = bo.gates.defined() ? bo.gates : gate(b, bo.input, b.gating.k);
    for (std::size_t x = 0; x < model->config().teachers.size(); ++x) {
      const Tensor m = reshape(slice(g, 0, static_cast<std::int64_t>(x), 1), {g.dim(1), g.dim(2)});
      const std::string stem =
          "gates_block" + std::to_string(i + 1) + "_" + teacher_name(model->config().teachers[x]);
      write_pgm(output_dir / (stem + ".pgm"), normalize_gate_map(m));
      write_pfm(output_dir / (stem + ".pfm"), m);
      written.push_back(output_dir / (stem + ".pgm"));
    }
  }
  return written;
}

int cmd_gradcheck(std::ostream& out, const std::string& inject_fault) {
  const auto entries = run_gradcheck_suite(inject_fault);
  bool ok = true;
  for (const auto& e : entries) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s %-40s max_rel %.3e  tol %.0e  checked %zu  skipped %zu",
                  e.passed() ? "ok" : "FAIL", e.report.name.c_str(), e.report.max_rel_error, e.tolerance,
                  e.report.checked, e.report.skipped_nonsmooth);
    out << buf;
    if (!e.report.nonfinite_op.empty()) out << "  non-finite at " << e.report.nonfinite_op;
    if (!e.passed() && !e.report.worst.empty()) out << "  worst: " << e.report.worst;
    out << "\n";
    ok = ok && e.passed();
  }
  out << (ok ? "gradcheck: all " : "gradcheck: FAILED, ") << entries.size() << " checks\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace aio
