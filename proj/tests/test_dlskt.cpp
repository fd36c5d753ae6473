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

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "aio/dlskt.hpp"
#include "aio/errors.hpp"
#include "aio/ops.hpp"
#include "oracles.hpp"

using namespace aio;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.context_channels = {4, 6, 8, 10};
  c.align_hidden = 5;
  c.teacher_channels = 3;
  return c;
}

Tensor input(std::uint64_t seed, Shape shape) {
  std::mt19937_64 rng(seed);
  return oracle::random_tensor(rng, shape, -1, 1, DType::f32);
}

void zero_experts(ContextNetwork& net) {
  for (auto& b : net.blocks)
    for (auto& e : b.experts) {
      e.conv.weight.fill(0.0);
      e.conv.bias.fill(0.0);
    }
}

TeacherFeatures constant_teacher(TeacherKind k, int stage, std::int64_t c, double v) {
  return {k, stage, Tensor::full({c, 5, 7}, v, DType::f32)};
}

// Forces A(e) to the constant `v` whatever e is.
void constant_alignment(DlsktBlock& b, std::size_t t, double v) {
  b.align[t].conv3.weight.fill(0.0);
  b.align[t].conv3.bias.fill(v);
}

std::int64_t conv_params(std::int64_t ci, std::int64_t co, std::int64_t k) { return ci * co * k * k + co; }

}  // namespace

TEST(Dlskt, ParameterGroupsAndHeavierAlignment) {
  ModelConfig cfg;
  ParamStore store(1);
  ContextNetwork net = make_context_network(store, cfg);
  std::int64_t align = 0;
  for (int i = 0; i < kNumStages; ++i) {
    const auto ci = cfg.context_channels[i], co = cfg.context_channels[i + 1];
    const auto h = cfg.align_hidden;
    for (std::size_t x = 0; x < cfg.teachers.size(); ++x) {
      EXPECT_EQ(net.blocks[i].experts[x].num_params(), conv_params(ci, co, 3));
      EXPECT_GT(net.blocks[i].align[x].num_params(), net.blocks[i].experts[x].num_params());
      align += conv_params(co, h, 3) + conv_params(h, h, 3) + conv_params(h, cfg.teacher_channels, 3);
    }
  }
  EXPECT_EQ(store.count(ParamGroup::alignment), align);
  EXPECT_EQ(align, 249'552);
  for (const auto& p : store.params())
    if (p.name.find(".gate.bias") != std::string::npos) {
      for (double v : p.tensor.to_vector()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Dlskt, ExpertShapesMatchBlockOutputs) {
  ModelConfig cfg;
  ParamStore store(2);
  ContextNetwork net = make_context_network(store, cfg);
  Tensor f = relu(net.stem(input(1, {3, 64, 64})));
  for (int i = 0; i < kNumStages; ++i) {
    const Tensor y = net.blocks[i].block(f);
    for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(expert_forward(net.blocks[i], x, f).shape(), y.shape());
    f = y;
  }
  EXPECT_EQ(f.shape(), (Shape{64, 16, 16}));
  EXPECT_THROW(expert_forward(net.blocks[1], 0, Tensor::zeros({3, 8, 8}, DType::f32)), ContractError);
  EXPECT_THROW(expert_forward(net.blocks[0], 3, f), ContractError);
}

TEST(Dlskt, ZeroExpertGivesZeroFeatures) {
  ParamStore store(3);
  ContextNetwork net = make_context_network(store, small_config());
  zero_experts(net);
  for (double v : expert_forward(net.blocks[0], 1, input(2, {4, 8, 12})).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Gate, SingleWinnerValue) {
  DlsktBlock b;
  b.gating.conv.weight = Tensor::zeros({3, 2, 3, 3}, DType::f64);
  b.gating.conv.bias = Tensor::from_vector({3}, {2.0, 1.0, 0.0}, DType::f64);
  b.gating.conv.padding = 1;
  Tensor g = gate(b, Tensor::zeros({2, 2, 3}, DType::f64), 1);
  const double e = std::exp(1.0);
  for (std::int64_t y = 0; y < 2; ++y)
    for (std::int64_t x = 0; x < 3; ++x) {
      EXPECT_NEAR(g.at({0, y, x}), e * e / (e * e + e + 1), 1e-15);
      EXPECT_NEAR(g.at({0, y, x}), 0.6652, 1e-4);
      EXPECT_EQ(g.at({1, y, x}), 0.0);
      EXPECT_EQ(g.at({2, y, x}), 0.0);
    }
  b.gating.conv.bias = Tensor::from_vector({3}, {1.0, 1.0, 0.0}, DType::f64);
  g = gate(b, Tensor::zeros({2, 1, 1}, DType::f64), 1);
  EXPECT_GT(g.at({0, 0, 0}), 0.0);
  EXPECT_EQ(g.at({1, 0, 0}), 0.0);
  EXPECT_THROW(gate(b, Tensor::zeros({2, 1, 1}, DType::f64), 0), ContractError);
  EXPECT_THROW(gate(b, Tensor::zeros({2, 1, 1}, DType::f64), 4), ContractError);
}

TEST(Gate, MatchesSoftmaxTopKOracle) {
  DTypeScope f64(DType::f64);
  ModelConfig cfg = small_config();
  ParamStore store(4);
  ContextNetwork net = make_context_network(store, cfg);
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < kNumStages; ++i) {
      const DlsktBlock& b = net.blocks[i];
      const Tensor f = input(10 + i, {cfg.context_channels[i], 9, 13}).to(DType::f64);
      const Tensor logits = b.gating.conv(f);
      const Tensor g = gate(b, f, k);
      ASSERT_EQ(g.shape(), logits.shape());
      for (std::int64_t y = 0; y < g.dim(1); ++y)
        for (std::int64_t x = 0; x < g.dim(2); ++x) {
          double l[3], s[3], z = 0, m = -INFINITY;
          for (int t = 0; t < 3; ++t) m = std::max(m, l[t] = logits.at({t, y, x}));
          for (int t = 0; t < 3; ++t) z += s[t] = std::exp(l[t] - m);
          for (double& v : s) v /= z;
          int positive = 0;
          for (int t = 0; t < 3; ++t) {
            int rank = 0;  // entries strictly ahead under the lower-index tie rule
            for (int u = 0; u < 3; ++u) rank += s[u] > s[t] || (s[u] == s[t] && u < t);
            const double want = rank < k ? s[t] : 0.0;
            EXPECT_NEAR(g.at({t, y, x}), want, 1e-12);
            positive += g.at({t, y, x}) > 0;
          }
          EXPECT_LE(positive, k);
        }
      if (k == 3) {
        EXPECT_EQ(g.to_vector(), softmax(logits, 0).to_vector());
      }
    }
}

TEST(Gate, ShiftInvariant) {
  ParamStore store(5);
  ContextNetwork net = make_context_network(store, small_config());
  DlsktBlock& b = net.blocks[1];
  const Tensor f = input(6, {6, 8, 8});
  const auto before = gate(b, f, 2).to_vector();
  b.gating.conv.bias.assign(std::vector<double>{7.5, 7.5, 7.5});
  const auto after = gate(b, f, 2).to_vector();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-6);
}

TEST(KdLoss, ConstantTargets) {
  ModelConfig cfg = small_config();
  ParamStore store(6);
  ContextNetwork net = make_context_network(store, cfg);
  DlsktBlock& b = net.blocks[1];
  const Tensor e = expert_forward(b, 0, input(7, {6, 10, 14}));
  constant_alignment(b, 0, 1.25);
  EXPECT_EQ(kd_loss(b, 0, e, constant_teacher(TeacherKind::dino, 2, 3, 0.25)).item(), 1.0);
  EXPECT_EQ(kd_loss(b, 0, e, constant_teacher(TeacherKind::dino, 2, 3, 1.25)).item(), 0.0);
  EXPECT_THROW(kd_loss(b, 0, e, constant_teacher(TeacherKind::dino, 1, 3, 0.0)), ContractError);
}

TEST(KdLoss, TeacherReceivesNoGradient) {
  ModelConfig cfg = small_config();
  ParamStore store(7);
  ContextNetwork net = make_context_network(store, cfg);
  const DlsktBlock& b = net.blocks[0];
  TeacherFeatures tf{TeacherKind::sam, 1, input(8, {3, 5, 5})};
  tf.map.set_requires_grad(true);
  Tensor f = input(9, {4, 10, 10});
  f.set_requires_grad(true);
  Tensor l = kd_loss(b, 1, expert_forward(b, 1, f), tf);
  backward(l);
  EXPECT_FALSE(tf.map.has_grad());
  EXPECT_TRUE(f.has_grad());
  EXPECT_TRUE(b.align[1].conv1.weight.has_grad());
  EXPECT_TRUE(b.experts[1].conv.weight.has_grad());
}

TEST(KdLoss, MultiTeacherSumDecomposes) {
  ModelConfig cfg = small_config();
  ParamStore store(8);
  ContextNetwork net = make_context_network(store, cfg);
  DlsktBlock& b = net.blocks[2];
  const Tensor f = input(11, {8, 12, 16});
  std::vector<Tensor> experts;
  std::vector<TeacherFeatures> feats;
  for (std::size_t x = 0; x < 3; ++x) {
    experts.push_back(expert_forward(b, x, f));
    feats.push_back({cfg.teachers[x], 3, input(20 + x, {3, 4, 5})});
  }
  std::vector<Tensor> parts;
  const double total = multi_kd_loss(b, cfg.teachers, experts, feats, &parts).item();
  ASSERT_EQ(parts.size(), 3u);
  double independent = 0;
  for (std::size_t x = 0; x < 3; ++x) independent += kd_loss(b, x, experts[x], feats[x]).item();
  EXPECT_NEAR(total, independent, 1e-7);

  for (std::size_t x = 0; x < 3; ++x) {
    constant_alignment(b, x, static_cast<double>(x + 1));
    feats[x].map = Tensor::full({3, 4, 5}, 0.0, DType::f32);
  }
  EXPECT_EQ(multi_kd_loss(b, cfg.teachers, experts, feats).item(), 1.0 + 4.0 + 9.0);
  for (std::size_t x = 0; x < 3; ++x) feats[x].map.fill(static_cast<double>(x + 1));
  EXPECT_EQ(multi_kd_loss(b, cfg.teachers, experts, feats).item(), 0.0);

  feats.pop_back();
  EXPECT_THROW(multi_kd_loss(b, cfg.teachers, experts, feats), ContractError);
}

TEST(SelectiveFuse, MatchesLoopOracle) {
  DTypeScope f64(DType::f64);
  ParamStore store(9);
  ContextNetwork net = make_context_network(store, small_config());
  const DlsktBlock& b = net.blocks[1];
  const Tensor f = input(12, {6, 10, 12}).to(DType::f64);
  const Tensor y = b.block(f);
  std::vector<Tensor> experts;
  for (int x = 0; x < 3; ++x) experts.push_back(input(30 + x, y.shape()).to(DType::f64));
  std::mt19937_64 rng(13);
  const Tensor g = oracle::random_tensor(rng, {3, y.dim(1), y.dim(2)}, 0, 1);
  const Tensor out = selective_fuse(b, f, experts, g);
  for (std::int64_t c = 0; c < y.dim(0); ++c)
    for (std::int64_t i = 0; i < y.dim(1); ++i)
      for (std::int64_t j = 0; j < y.dim(2); ++j) {
        double want = y.at({c, i, j});
        for (std::int64_t x = 0; x < 3; ++x) want += experts[x].at({c, i, j}) * g.at({x, i, j});
        EXPECT_NEAR(out.at({c, i, j}), want, 1e-6);
      }
  EXPECT_EQ(selective_fuse(b, f, experts, Tensor::zeros(g.shape())).to_vector(), y.to_vector());
  Tensor one_hot = Tensor::zeros(g.shape());
  for (std::int64_t i = 0; i < y.dim(1); ++i)
    for (std::int64_t j = 0; j < y.dim(2); ++j) one_hot.set({1, i, j}, 1.0);
  EXPECT_EQ(selective_fuse(b, f, experts, one_hot).to_vector(), add(y, experts[1]).to_vector());
  EXPECT_THROW(selective_fuse(b, f, {experts[0]}, g), ContractError);
  EXPECT_THROW(fuse_with(y, {experts[0], experts[1], Tensor::zeros({6, 2, 2})}, g), ContractError);
}

TEST(SelectiveFuse, SingleTeacherWithUnitGateIsExpertResidual) {
  ModelConfig cfg = small_config();
  cfg.teachers = {TeacherKind::sam};
  cfg.top_k = 1;
  ParamStore store(10);
  ContextNetwork net = make_context_network(store, cfg);
  const DlsktBlock& b = net.blocks[0];
  const Tensor f = input(14, {4, 8, 8});
  const Tensor g = gate(b, f, 1);
  for (double v : g.to_vector()) EXPECT_EQ(v, 1.0);
  const Tensor e = expert_forward(b, 0, f);
  EXPECT_EQ(selective_fuse(b, f, {e}, g).to_vector(), add(b.block(f), e).to_vector());
}

class ContextForward : public ::testing::Test {
 protected:
  void SetUp() override {
    sample.id = "cf";
    sample.left = input(40, {3, 32, 48});
    sample.right = input(41, {3, 32, 48});
    sample.gt_disparity = Tensor::full({32, 48}, 2.0, DType::f32);
    sample.valid = Tensor::full({32, 48}, 1.0, DType::f32);
    TeacherSet ts;
    for (TeacherKind k : cfg.teachers) ts.push_back(std::make_shared<SyntheticTeacher>(k, 3));
    maps = teacher_maps(ts, sample);
  }

  ModelConfig cfg;
  StereoSample sample;
  TeacherMaps maps;
};

TEST_F(ContextForward, OutputsPerArm) {
  ParamStore store(11);
  const ContextNetwork net = make_context_network(store, cfg);
  const ContextResult full = context_forward(sample.left, net, cfg, Ablation::full, &maps);
  EXPECT_EQ(full.f3.shape(), (Shape{64, 8, 12}));
  ASSERT_TRUE(full.aux.distilled());
  int kd = 0;
  for (int i = 0; i < kNumStages; ++i) {
    const BlockOutputs& o = full.aux.blocks[i];
    kd += static_cast<int>(o.kd.size());
    EXPECT_EQ(o.experts.size(), 3u);
    for (double v : o.gates.to_vector()) EXPECT_GE(v, 0.0);
    double sum = 0;
    for (const Tensor& l : o.kd) sum += l.item();
    EXPECT_NEAR(o.kd_total.item(), sum, 1e-5);
  }
  EXPECT_EQ(kd, 9);

  const ContextResult base = context_forward(sample.left, net, cfg, Ablation::baseline, &maps);
  EXPECT_FALSE(base.aux.distilled());
  EXPECT_TRUE(base.aux.blocks[0].experts.empty());
  EXPECT_FALSE(base.aux.blocks[0].gates.defined());

  const ContextResult nofuse = context_forward(sample.left, net, cfg, Ablation::no_fusion, &maps);
  EXPECT_TRUE(nofuse.aux.distilled());
  EXPECT_FALSE(nofuse.aux.blocks[2].gates.defined());
  EXPECT_EQ(nofuse.f3.to_vector(), base.f3.to_vector());

  const ContextResult nodistil = context_forward(sample.left, net, cfg, Ablation::no_distillation, &maps);
  EXPECT_FALSE(nodistil.aux.distilled());
  EXPECT_EQ(nodistil.f3.to_vector(), full.f3.to_vector());

  const ContextResult uniform = context_forward(sample.left, net, cfg, Ablation::no_selection, &maps);
  for (double v : uniform.aux.blocks[1].gates.to_vector()) EXPECT_FLOAT_EQ(static_cast<float>(v), 1.0f / 3.0f);
  EXPECT_TRUE(uniform.aux.distilled());

  EXPECT_FALSE(context_forward(sample.left, net, cfg, Ablation::full, nullptr).aux.distilled());
}

TEST_F(ContextForward, ZeroExpertsAreIsolated) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ParamStore store(seed);
    ContextNetwork net = make_context_network(store, cfg);
    zero_experts(net);
    const Tensor image = input(50 + seed, {3, 32, 48});
    const Tensor with = context_forward(image, net, cfg, Ablation::full, &maps).f3;
    Tensor plain = relu(net.stem(image));
    for (const auto& b : net.blocks) plain = b.block(plain);
    EXPECT_EQ(with.to_vector(), plain.to_vector());
  }
}

TEST(Ablation, NamesRoundTrip) {
  for (Ablation a : {Ablation::full, Ablation::no_selection, Ablation::no_distillation, Ablation::no_fusion,
                     Ablation::baseline})
    EXPECT_EQ(parse_ablation(ablation_name(a)), a);
  EXPECT_THROW(parse_ablation("half"), ConfigError);
}
