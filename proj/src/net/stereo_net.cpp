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

#include "aio/stereo_net.hpp"

#include <cmath>

#include "aio/errors.hpp"
#include "aio/ops.hpp"

namespace aio {

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_selection: return "no_selection";
    case Ablation::no_distillation: return "no_distillation";
    case Ablation::no_fusion: return "no_fusion";
    case Ablation::baseline: return "baseline";
  }
  return "?";
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : {Ablation::full, Ablation::no_selection, Ablation::no_distillation, Ablation::no_fusion,
                 Ablation::baseline})
    if (ablation_name(a) == name) return a;
  throw ConfigError("unknown ablation '" + name +
                    "' (expected full, no_selection, no_distillation, no_fusion or baseline)");
}

void ModelConfig::validate() const {
  auto positive = [](std::int64_t v, const char* what) {
    if (v <= 0) throw ConfigError(std::string("model.") + what + " must be positive");
  };
  for (auto c : context_channels) positive(c, "context_channels");
  for (auto c : feature_hidden) positive(c, "feature_hidden");
  positive(feature_channels, "feature_channels");
  positive(hidden_channels, "hidden_channels");
  if (hidden_channels < 2) throw ConfigError("model.hidden_channels must be at least 2");
  positive(max_disparity, "max_disparity");
  positive(corr_levels, "corr_levels");
  positive(corr_radius, "corr_radius");
  positive(train_iters, "train_iters");
  positive(eval_iters, "eval_iters");
  positive(align_hidden, "align_hidden");
  positive(teacher_channels, "teacher_channels");
  if (teachers.empty()) throw ConfigError("model.teachers must not be empty");
  for (std::size_t i = 0; i < teachers.size(); ++i)
    for (std::size_t j = i + 1; j < teachers.size(); ++j)
      if (teachers[i] == teachers[j]) throw ConfigError("model.teachers lists '" + teacher_name(teachers[i]) + "' twice");
  if (top_k < 1 || top_k > static_cast<int>(teachers.size()))
    throw ConfigError("model.top_k must be in [1, " + std::to_string(teachers.size()) + "]");
}

Tensor FeatureNet::operator()(const Tensor& image) const {
  Tensor x = relu(stem(image));
  x = res1b(res1a(x));
  x = relu(down(x));
  x = res2b(res2a(x));
  return out(x);
}

FeatureNet make_feature_net(ParamStore& store, const ModelConfig& cfg) {
  const auto c1 = cfg.feature_hidden[0], c2 = cfg.feature_hidden[1];
  FeatureNet f;
  f.stem = make_conv(store, "fnet.stem", 3, c1, 7, 2);
  f.res1a = make_residual_unit(store, "fnet.res1a", c1, c1, 1);
  f.res1b = make_residual_unit(store, "fnet.res1b", c1, c1, 1);
  f.down = make_conv(store, "fnet.down", c1, c2, 3, 2);
  f.res2a = make_residual_unit(store, "fnet.res2a", c2, c2, 1);
  f.res2b = make_residual_unit(store, "fnet.res2b", c2, c2, 1);
  f.out = make_conv(store, "fnet.out", c2, cfg.feature_channels, 1, 1);
  return f;
}

FeaturePair feature_net(const FeatureNet& net, const StereoSample& sample) {
  sample.validate();
  return {net(sample.left), net(sample.right)};
}

CorrelationPyramid build_corr(const FeaturePair& pair, std::int64_t max_disp, int levels) {
  if (pair.left.shape() != pair.right.shape())
    throw ContractError("feature maps differ: " + shape_str(pair.left.shape()) + " vs " +
                        shape_str(pair.right.shape()));
  if (max_disp < 1 || max_disp > pair.left.dim(2))
    throw ContractError("max disparity " + std::to_string(max_disp) + " not in [1, " +
                        std::to_string(pair.left.dim(2)) + "]");
  if (levels < 1) throw ContractError("pyramid needs at least one level");
  CorrelationPyramid pyr;
  pyr.levels.push_back(correlation(pair.left, pair.right, max_disp));
  for (int j = 1; j < levels; ++j) pyr.levels.push_back(avg_pool_last2(pyr.levels.back()));
  return pyr;
}

Tensor corr_lookup(const CorrelationPyramid& pyr, const Tensor& disparity, int radius) {
  if (radius < 1) throw ContractError("lookup radius must be >= 1");
  std::vector<Tensor> parts;
  for (std::size_t j = 0; j < pyr.levels.size(); ++j)
    parts.push_back(sample_volume(pyr.levels[j], disparity, std::ldexp(1.0, static_cast<int>(j)), radius));
  return concat(parts, 0);
}

UpdateBlock make_update_block(ParamStore& store, const ModelConfig& cfg) {
  const auto ch = cfg.hidden_channels;
  UpdateBlock u;
  u.motion1 = make_conv(store, "update.motion1", cfg.corr_features() + 1, ch, 3);
  u.motion2 = make_conv(store, "update.motion2", ch, ch - 1, 3);
  // h, motion (ch), context injection (ch)
  u.convz = make_conv(store, "update.convz", 3 * ch, ch, 3);
  u.convr = make_conv(store, "update.convr", 3 * ch, ch, 3);
  u.convq = make_conv(store, "update.convq", 3 * ch, ch, 3);
  u.head1 = make_conv(store, "update.head1", ch, ch, 3);
  u.head2 = make_conv(store, "update.head2", ch, 1, 3);
  // Zero output layer: the first refinement sits on the clamp boundary, where gradient still passes.
  u.head2.weight.fill(0.0);
  u.head2.bias.fill(0.0);
  return u;
}

GruResult gru_update(const UpdateBlock& ub, const GruState& state, const Tensor& corr_feat) {
  const Tensor disp = state.disparity.detach();
  Tensor motion = relu(ub.motion1(concat({corr_feat, disp}, 0)));
  motion = concat({relu(ub.motion2(motion)), disp}, 0);
  const Tensor x = concat({motion, state.context_inject}, 0);
  const Tensor& h = state.hidden;
  const Tensor hx = concat({h, x}, 0);
  const Tensor z = sigmoid(ub.convz(hx));
  const Tensor r = sigmoid(ub.convr(hx));
  const Tensor q = tanh(ub.convq(concat({mul(r, h), x}, 0)));
  // (1 - z) h + z q  ==  h + z (q - h)
  const Tensor h_new = add(h, mul(z, sub(q, h)));
  const Tensor delta = ub.head2(relu(ub.head1(h_new)));
  GruResult out;
  out.state.hidden = h_new;
  out.state.context_inject = state.context_inject;
  out.state.disparity = clamp_min(add(disp, delta), 0.0);
  out.delta = delta;
  return out;
}

Tensor upsample_disparity(const Tensor& d_quarter) {
  if (d_quarter.ndim() != 3 || d_quarter.dim(0) != 1)
    throw DimensionError("disparity must be [1,h,w], got " + shape_str(d_quarter.shape()));
  const auto h = d_quarter.dim(1) * 4, w = d_quarter.dim(2) * 4;
  return reshape(scale(interp_bilinear(d_quarter, h, w), 4.0), {h, w});
}

StereoModel::StereoModel(ModelConfig cfg, Ablation ablation, std::uint64_t seed)
    : cfg_(std::move(cfg)), ablation_(ablation), store_(seed) {
  cfg_.validate();
  fnet_ = make_feature_net(store_, cfg_);
  ctx_ = make_context_network(store_, cfg_);
  const auto c3 = cfg_.context_channels[3];
  hidden_proj_ = make_conv(store_, "ctx.hidden_proj", c3, cfg_.hidden_channels, 1);
  inject_proj_ = make_conv(store_, "ctx.inject_proj", c3, cfg_.hidden_channels, 1);
  update_ = make_update_block(store_, cfg_);
}

ForwardResult StereoModel::forward(const StereoSample& sample, const TeacherMaps* maps, int iters) const {
  if (iters < 1) throw ContractError("iteration count must be >= 1");
  const FeaturePair pair = feature_net(fnet_, sample);
  const CorrelationPyramid pyr = build_corr(pair, cfg_.max_disparity, cfg_.corr_levels);
  ContextResult ctx = context_forward(sample.left, ctx_, cfg_, ablation_, maps);

  GruState state;
  state.hidden = tanh(hidden_proj_(ctx.f3));
  state.context_inject = relu(inject_proj_(ctx.f3));
  state.disparity = Tensor::zeros({1, pair.left.dim(1), pair.left.dim(2)}, sample.left.dtype());

  ForwardResult out;
  out.aux = std::move(ctx.aux);
  for (int i = 0; i < iters; ++i) {
    const Tensor corr = corr_lookup(pyr, state.disparity, cfg_.corr_radius);
    state = gru_update(update_, state, corr).state;
    out.predictions.push_back(upsample_disparity(state.disparity));
  }
  return out;
}

}  // namespace aio
