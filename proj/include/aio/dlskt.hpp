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
#include <vector>

#include "aio/model_config.hpp"
#include "aio/nn.hpp"
#include "aio/teachers.hpp"

namespace aio {

/// Residual block B_i: two residual units, the first carrying the stride.
struct ContextBlock {
  int index = 1;  // 1..3
  int stride = 1;
  std::int64_t c_in = 0, c_out = 0;
  ResidualUnit unit1, unit2;

  Tensor operator()(const Tensor& x) const;
};

/// E_i^x: 3x3 conv (block stride) -> instance norm -> relu.
struct ExpertNetwork {
  Conv2d conv;
  Tensor operator()(const Tensor& f) const;
  std::int64_t num_params() const { return conv.num_params(); }
};

/// A_i^x: conv3x3 -> relu -> conv3x3 -> relu -> conv3x3 to the teacher width.
struct AlignmentNetwork {
  Conv2d conv1, conv2, conv3;
  Tensor operator()(const Tensor& e) const;
  std::int64_t num_params() const { return conv1.num_params() + conv2.num_params() + conv3.num_params(); }
};

/// G_i: 3x3 conv (block stride) producing one logit map per teacher.
struct GatingNetwork {
  Conv2d conv;
  int k = 2;
};

struct DlsktBlock {
  ContextBlock block;
  std::vector<ExpertNetwork> experts;   // one per teacher, config order
  std::vector<AlignmentNetwork> align;  // one per teacher
  GatingNetwork gating;
};

/// Per-teacher teacher maps for one sample: maps[stage-1][teacher index].
using TeacherMaps = std::array<std::vector<TeacherFeatures>, kNumStages>;

TeacherMaps teacher_maps(const TeacherSet& teachers, const StereoSample& sample);

struct BlockOutputs {
  Tensor input;                 // f_{i-1}
  std::vector<Tensor> experts;  // e_i^x, empty for the baseline arm
  Tensor gates;                 // [|T|, h_i, w_i]; undefined for the baseline arm
  std::vector<Tensor> kd;       // L_KD,i^x scalars; empty when distillation is off
  Tensor kd_total;              // L_KD,i; undefined when distillation is off
};

struct DlsktOutputs {
  std::array<BlockOutputs, kNumStages> blocks;
  bool distilled() const { return blocks[0].kd_total.defined(); }
};

struct ContextNetwork {
  Conv2d stem;  // 7x7, stride 1, 3 -> C_0
  std::array<DlsktBlock, kNumStages> blocks;
};

/// Registers the context stem, residual blocks and the transfer modules.
/// Expert, gate and block parameters are `main`; alignment networks are
/// `alignment`. The gating bias starts at 0.
ContextNetwork make_context_network(ParamStore& store, const ModelConfig& cfg);

Tensor expert_forward(const DlsktBlock& b, std::size_t teacher, const Tensor& f);

/// MSE(A(e), interp_bilinear(teacher map to A(e)'s size)). Teacher maps are
/// used as constants.
Tensor kd_loss(const DlsktBlock& b, std::size_t teacher, const Tensor& expert, const TeacherFeatures& tf);

/// Sum of kd_loss over teachers; `teacher_feats` must follow the block's
/// teacher order, one entry per teacher, each at this block's stage.
Tensor multi_kd_loss(const DlsktBlock& b, const std::vector<TeacherKind>& kinds, const std::vector<Tensor>& experts,
                     const std::vector<TeacherFeatures>& teacher_feats, std::vector<Tensor>* per_teacher = nullptr);

/// KeepTopK(Softmax(G_i(f))) over the teacher axis.
Tensor gate(const DlsktBlock& b, const Tensor& f, int k);

/// B_i(f) + sum_x e_x (.) g(x), gates broadcast over channels.
Tensor selective_fuse(const DlsktBlock& b, const Tensor& f, const std::vector<Tensor>& experts, const Tensor& gates);
/// Same as above with B_i(f) already evaluated.
Tensor fuse_with(const Tensor& block_out, const std::vector<Tensor>& experts, const Tensor& gates);

struct ContextResult {
  Tensor f3;
  DlsktOutputs aux;
};

/// Stem then three (block + transfer) stages. KD losses are computed only for
/// distilling arms and only when `maps` is given.
ContextResult context_forward(const Tensor& image, const ContextNetwork& net, const ModelConfig& cfg,
                              Ablation ablation, const TeacherMaps* maps);

}  // namespace aio
