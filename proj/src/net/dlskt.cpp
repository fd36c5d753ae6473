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

#include "aio/dlskt.hpp"

#include <cmath>

#include "aio/errors.hpp"
#include "aio/ops.hpp"

namespace aio {

Tensor ContextBlock::operator()(const Tensor& x) const { return unit2(unit1(x)); }

Tensor ExpertNetwork::operator()(const Tensor& f) const { return relu(instance_norm(conv(f))); }

Tensor AlignmentNetwork::operator()(const Tensor& e) const { return conv3(relu(conv2(relu(conv1(e))))); }

ContextNetwork make_context_network(ParamStore& store, const ModelConfig& cfg) {
  ContextNetwork net;
  const auto& C = cfg.context_channels;
  net.stem = make_conv(store, "ctx.stem", 3, C[0], 7, 1);
  constexpr std::array<int, kNumStages> strides{1, 2, 2};
  for (int i = 0; i < kNumStages; ++i) {
    const std::string p = "ctx.block" + std::to_string(i + 1);
    DlsktBlock& b = net.blocks[i];
    b.block.index = i + 1;
    b.block.stride = strides[i];
    b.block.c_in = C[i];
    b.block.c_out = C[i + 1];
    b.block.unit1 = make_residual_unit(store, p + ".unit1", C[i], C[i + 1], strides[i]);
    b.block.unit2 = make_residual_unit(store, p + ".unit2", C[i + 1], C[i + 1], 1);
    for (TeacherKind t : cfg.teachers) {
      const std::string q = p + "." + teacher_name(t);
      b.experts.push_back({make_conv(store, q + ".expert", C[i], C[i + 1], 3, strides[i])});
      AlignmentNetwork a;
      a.conv1 = make_conv(store, q + ".align1", C[i + 1], cfg.align_hidden, 3, 1, ParamGroup::alignment);
      a.conv2 = make_conv(store, q + ".align2", cfg.align_hidden, cfg.align_hidden, 3, 1, ParamGroup::alignment);
      a.conv3 = make_conv(store, q + ".align3", cfg.align_hidden, cfg.teacher_channels, 3, 1, ParamGroup::alignment);
      b.align.push_back(a);
    }
    const auto T = static_cast<std::int64_t>(cfg.teachers.size());
    const double bound = 1.0 / std::sqrt(static_cast<double>(C[i] * 9));
    b.gating.conv.weight = store.uniform(p + ".gate.weight", {T, C[i], 3, 3}, bound, ParamGroup::main);
    b.gating.conv.bias = store.constant(p + ".gate.bias", {T}, 0.0, ParamGroup::main);
    b.gating.conv.stride = strides[i];
    b.gating.conv.padding = 1;
    b.gating.k = cfg.top_k;
  }
  return net;
}

TeacherMaps teacher_maps(const TeacherSet& teachers, const StereoSample& sample) {
  NoGradGuard no_grad;
  TeacherMaps maps;
  for (int s = 1; s <= kNumStages; ++s)
    for (const auto& t : teachers) maps[s - 1].push_back(t->stage_features(sample, s));
  return maps;
}

Tensor expert_forward(const DlsktBlock& b, std::size_t teacher, const Tensor& f) {
  if (teacher >= b.experts.size()) throw ContractError("expert index out of range");
  if (f.ndim() != 3 || f.dim(0) != b.block.c_in)
    throw ContractError("block " + std::to_string(b.block.index) + " expects " + std::to_string(b.block.c_in) +
                        " input channels, got " + shape_str(f.shape()));
  return b.experts[teacher](f);
}

Tensor kd_loss(const DlsktBlock& b, std::size_t teacher, const Tensor& expert, const TeacherFeatures& tf) {
  if (tf.stage != b.block.index)
    throw ContractError("teacher stage " + std::to_string(tf.stage) + " fed to block " +
                        std::to_string(b.block.index));
  const Tensor aligned = b.align.at(teacher)(expert);
  Tensor target = tf.map.detach();
  if (target.dtype() != aligned.dtype()) target = target.to(aligned.dtype());
  target = interp_bilinear(target, aligned.dim(1), aligned.dim(2));
  return mse_loss(aligned, target);
}

Tensor multi_kd_loss(const DlsktBlock& b, const std::vector<TeacherKind>& kinds, const std::vector<Tensor>& experts,
                     const std::vector<TeacherFeatures>& teacher_feats, std::vector<Tensor>* per_teacher) {
  if (experts.size() != kinds.size()) throw ContractError("one expert feature per teacher required");
  Tensor total;
  for (std::size_t x = 0; x < kinds.size(); ++x) {
    const TeacherFeatures* tf = nullptr;
    for (const auto& cand : teacher_feats)
      if (cand.kind == kinds[x]) tf = &cand;
    if (!tf) throw ContractError("missing teacher features for '" + teacher_name(kinds[x]) + "'");
    Tensor l = kd_loss(b, x, experts[x], *tf);
    if (per_teacher) per_teacher->push_back(l);
    total = total.defined() ? add(total, l) : l;
  }
  return total;
}

Tensor gate(const DlsktBlock& b, const Tensor& f, int k) {
  const auto T = b.gating.conv.out_channels();
  if (k < 1 || k > T) throw ContractError("top-k " + std::to_string(k) + " not in [1," + std::to_string(T) + "]");
  return keep_topk(softmax(b.gating.conv(f), 0), k);
}

Tensor fuse_with(const Tensor& block_out, const std::vector<Tensor>& experts, const Tensor& gates) {
  if (gates.ndim() != 3 || gates.dim(0) != static_cast<std::int64_t>(experts.size()))
    throw ContractError("gate map " + shape_str(gates.shape()) + " does not match " +
                        std::to_string(experts.size()) + " experts");
  Tensor out = block_out;
  for (std::size_t x = 0; x < experts.size(); ++x) {
    if (experts[x].shape() != block_out.shape())
      throw ContractError("expert feature " + shape_str(experts[x].shape()) + " does not match block output " +
                          shape_str(block_out.shape()));
    out = add(out, mul(slice(gates, 0, static_cast<std::int64_t>(x), 1), experts[x]));
  }
  return out;
}

Tensor selective_fuse(const DlsktBlock& b, const Tensor& f, const std::vector<Tensor>& experts, const Tensor& gates) {
  return fuse_with(b.block(f), experts, gates);
}

ContextResult context_forward(const Tensor& image, const ContextNetwork& net, const ModelConfig& cfg,
                              Ablation ablation, const TeacherMaps* maps) {
  const bool use_experts = ablation != Ablation::baseline;
  const bool distil = maps != nullptr && (ablation == Ablation::full || ablation == Ablation::no_selection ||
                                          ablation == Ablation::no_fusion);
  const bool fuse = use_experts && ablation != Ablation::no_fusion;

  ContextResult r;
  Tensor f = relu(net.stem(image));
  for (int i = 0; i < kNumStages; ++i) {
    const DlsktBlock& b = net.blocks[i];
    BlockOutputs& out = r.aux.blocks[i];
    out.input = f;
    Tensor y = b.block(f);
    if (use_experts) {
      for (std::size_t x = 0; x < b.experts.size(); ++x) out.experts.push_back(expert_forward(b, x, f));
      if (fuse) {
        if (ablation == Ablation::no_selection) {
          const auto T = static_cast<std::int64_t>(b.experts.size());
          out.gates = Tensor::full({T, y.dim(1), y.dim(2)}, 1.0 / static_cast<double>(T), y.dtype());
        } else {
          out.gates = gate(b, f, b.gating.k);
        }
        y = fuse_with(y, out.experts, out.gates);
      }
      if (distil) out.kd_total = multi_kd_loss(b, cfg.teachers, out.experts, (*maps)[i], &out.kd);
    }
    f = y;
  }
  r.f3 = f;
  return r;
}

}  // namespace aio
