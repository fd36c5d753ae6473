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

#include "aio/teachers.hpp"

namespace aio {

/// Table-1 style ablation arms. Every arm builds the same parameter set; the
/// arms differ only in which parts of the transfer module run.
enum class Ablation {
  full,             // distillation + gated fusion
  no_selection,     // dense uniform gates 1/|T| instead of softmax + top-k
  no_distillation,  // fusion only, no KD losses
  no_fusion,        // KD losses only, experts not added back
  baseline,         // no experts, gates or KD
};

std::string ablation_name(Ablation a);
/// Accepts the names above; throws ConfigError otherwise.
Ablation parse_ablation(const std::string& name);

struct ModelConfig {
  std::array<std::int64_t, 4> context_channels{32, 32, 48, 64};  // C_0 (stem) .. C_3
  std::array<std::int64_t, 2> feature_hidden{32, 48};
  std::int64_t feature_channels = 64;  // C_f
  std::int64_t hidden_channels = 64;   // C_h
  std::int64_t max_disparity = 16;     // D, quarter resolution
  int corr_levels = 4;
  int corr_radius = 4;
  int train_iters = 8;
  int eval_iters = 16;
  int top_k = 2;
  std::int64_t align_hidden = 32;
  std::vector<TeacherKind> teachers{TeacherKind::dino, TeacherKind::sam, TeacherKind::depth};
  std::int64_t teacher_channels = kSynthChannels;

  std::int64_t corr_features() const { return corr_levels * (2 * corr_radius + 1); }
  void validate() const;  // throws ConfigError
};

}  // namespace aio
