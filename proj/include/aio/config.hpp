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
#include <string>

#include "aio/data_gen.hpp"
#include "aio/model_config.hpp"

namespace aio {

struct TrainConfig {
  std::int64_t steps = 500;
  int batch_size = 2;
  double peak_lr = 2e-4;
  double warm_frac = 0.01;
  double weight_decay = 1e-5;
  double align_lr_mult = 3.0;
  double align_half_life_frac = 0.1;
  double gamma_p = 0.9;
  double gamma_kd = 0.9;
  std::int64_t val_every = 50;
  int val_probe = 4;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  Ablation ablation = Ablation::full;
};

struct EvalConfig {
  bool render = true;      // write disparity PFM/PGM renders
  bool pooled_a90 = true;  // aggregate A90 from pooled errors
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  DataConfig data;
  ModelConfig model;
  double teacher_noise = 0.1;          // depth teacher noise amplitude
  std::filesystem::path teacher_dir;   // empty: synthetic teachers
  TrainConfig train;
  EvalConfig eval;

  void validate() const;  // throws ConfigError
};

/// Parses and validates a JSON document. Every key is optional; unknown keys
/// and ill-typed values raise ConfigError. Relative paths are kept as given.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, fixed formatting) of the whole config and of
/// the model section.
std::string run_config_json(const RunConfig& cfg);
std::string model_config_json(const ModelConfig& m);
ModelConfig parse_model_config(const std::string& json_text);

/// FNV-1a 64 of model_config_json.
std::uint64_t model_config_hash(const ModelConfig& m);

}  // namespace aio
