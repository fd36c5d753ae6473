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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aio/config.hpp"
#include "aio/nn.hpp"
#include "aio/stereo_net.hpp"

namespace aio {

/// L_P = sum_i gamma^(N-i) * masked L1(p_i, gt). When `per_iter` is given it
/// receives the N unweighted L1 values.
Tensor prediction_loss(const std::vector<Tensor>& preds, const Tensor& gt, const Tensor& valid, double gamma_p,
                       std::vector<double>* per_iter = nullptr);

/// L_AIO = L_P + sum_j gamma^(4-j) L_KD,j for j = 1..3. Undefined KD terms
/// count as zero.
Tensor total_loss(const Tensor& l_p, const std::array<Tensor, 3>& kd, double gamma_kd);
/// Same formula on plain numbers.
double total_loss_value(double l_p, const std::array<double, 3>& kd, double gamma_kd);

/// Linear warm-up from 0 to `peak` over warm_frac * total steps, then linear
/// decay to 0 at `total`.
double one_cycle_lr(std::int64_t step, std::int64_t total, double peak, double warm_frac);

/// Per-step decay rho of the alignment group: rho^(half_life_frac * total) = 1/2.
double align_decay_rate(std::int64_t total, double half_life_frac);
/// Alignment-group LR relative to the main group: mult * rho^step.
double align_lr_ratio(std::int64_t step, std::int64_t total, double mult, double half_life_frac);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Decoupled-weight-decay Adam over a ParamStore. Parameters without a
/// gradient are skipped, as are their moments.
class AdamW {
 public:
  AdamW(ParamStore& store, AdamWConfig cfg);

  /// One update; `lr_main` and `lr_align` are the group learning rates.
  /// Throws NumericError naming the first parameter with a non-finite gradient.
  void step(double lr_main, double lr_align);

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }

 private:
  ParamStore& store_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Checkpoint container:
//   "FTCK" | u32 version | u64 step | u64 config hash | str meta JSON |
//   u32 count | count x (str name | u64 offset | u64 size) | FTC blobs
// Strings are u32 length + bytes; offsets are relative to the first blob.
struct Checkpoint {
  std::int64_t step = 0;
  std::uint64_t config_hash = 0;
  std::string meta;  // {"model": {...}, "ablation": "..."}
  std::vector<std::pair<std::string, Tensor>> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters as "param/<name>", moments as "adam_m/<name>", "adam_v/<name>".
Checkpoint make_checkpoint(const StereoModel& model, const AdamW* opt, std::int64_t step);
/// Copies checkpoint tensors into the model (and optimizer). Throws
/// ContractError when names or shapes disagree.
void restore_checkpoint(const Checkpoint& ck, StereoModel& model, AdamW* opt);
/// Builds a model from the checkpoint's embedded config and restores it.
std::unique_ptr<StereoModel> model_from_checkpoint(const Checkpoint& ck);

/// CSV columns of the training log.
std::vector<std::string> train_log_columns(const ModelConfig& m);

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  double initial_val_epe = 0.0;
  double final_val_epe = 0.0;
  std::int64_t steps = 0;
};

/// Progress hook: (step, total, L_AIO, val EPE or NaN).
using TrainProgress = std::function<void(std::int64_t, std::int64_t, double, double)>;

/// Runs the training loop described by `cfg`, writing
/// <output_dir>/train_log.csv and <output_dir>/checkpoint.ftck (plus
/// checkpoint_<step>.ftck at the configured cadence).
TrainResult train(const RunConfig& cfg, const TrainProgress& progress = {});

/// Mean EPE of the model over `samples` with `iters` refinement steps.
double validation_epe(const StereoModel& model, const std::vector<StereoSample>& samples, int iters);

TeacherSet make_teachers(const RunConfig& cfg);

}  // namespace aio
