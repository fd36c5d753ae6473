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
#include <vector>

#include "aio/dlskt.hpp"
#include "aio/model_config.hpp"
#include "aio/nn.hpp"
#include "aio/sample.hpp"

namespace aio {

/// Shared-weight encoder: 7x7/2 conv -> 2 residual units -> 3x3/2 conv ->
/// 2 residual units -> 1x1 conv to C_f. Output is quarter resolution.
struct FeatureNet {
  Conv2d stem;
  ResidualUnit res1a, res1b;
  Conv2d down;
  ResidualUnit res2a, res2b;
  Conv2d out;

  Tensor operator()(const Tensor& image) const;
};

FeatureNet make_feature_net(ParamStore& store, const ModelConfig& cfg);

struct FeaturePair {
  Tensor left, right;  // [C_f, H/4, W/4]
};

/// Throws ContractError if H or W is not a multiple of 4.
FeaturePair feature_net(const FeatureNet& net, const StereoSample& sample);

struct CorrelationPyramid {
  std::vector<Tensor> levels;  // [h, w, ceil(D / 2^j)]
};

/// Correlation volume scaled by 1/sqrt(C_f) plus `levels - 1` poolings along
/// the disparity axis. Requires 1 <= D <= W/4.
CorrelationPyramid build_corr(const FeaturePair& pair, std::int64_t max_disp, int levels = 4);

/// Samples every level at d/2^j + delta, delta in [-radius, radius], and
/// stacks them: [levels * (2r+1), h, w]. The disparity is not differentiated.
Tensor corr_lookup(const CorrelationPyramid& pyr, const Tensor& disparity, int radius);

struct GruState {
  Tensor hidden;          // [C_h, h, w]
  Tensor context_inject;  // [C_h, h, w]
  Tensor disparity;       // [1, h, w], quarter-resolution pixels
};

struct UpdateBlock {
  Conv2d motion1, motion2;  // [corr, disp] -> C_h, C_h -> C_h - 1
  Conv2d convz, convr, convq;
  Conv2d head1, head2;  // C_h -> C_h -> 1
};

UpdateBlock make_update_block(ParamStore& store, const ModelConfig& cfg);

struct GruResult {
  GruState state;
  Tensor delta;  // [1, h, w]
};

/// One refinement step: motion encoding, ConvGRU, delta head and
/// disparity <- max(detach(disparity) + delta, 0).
GruResult gru_update(const UpdateBlock& ub, const GruState& state, const Tensor& corr_feat);

/// Bilinear x4 resize with values x4; returns [4h, 4w].
Tensor upsample_disparity(const Tensor& d_quarter);

struct ForwardResult {
  std::vector<Tensor> predictions;  // N maps [H, W]
  DlsktOutputs aux;
};

class StereoModel {
 public:
  StereoModel(ModelConfig cfg, Ablation ablation, std::uint64_t seed);

  StereoModel(const StereoModel&) = delete;
  StereoModel& operator=(const StereoModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  Ablation ablation() const { return ablation_; }
  void set_ablation(Ablation a) { ablation_ = a; }

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  const FeatureNet& feature() const { return fnet_; }
  const ContextNetwork& context() const { return ctx_; }
  const UpdateBlock& update() const { return update_; }

  /// `maps` may be null for arms that do not distil, or during evaluation
  /// when KD terms are not wanted (distillation is then skipped).
  ForwardResult forward(const StereoSample& sample, const TeacherMaps* maps, int iters) const;

 private:
  ModelConfig cfg_;
  Ablation ablation_;
  ParamStore store_;
  FeatureNet fnet_;
  ContextNetwork ctx_;
  Conv2d hidden_proj_, inject_proj_;
  UpdateBlock update_;
};

}  // namespace aio
