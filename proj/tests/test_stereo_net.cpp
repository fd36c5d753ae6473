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

#include <algorithm>
#include <cmath>
#include <random>

#include "aio/errors.hpp"
#include "aio/ops.hpp"
#include "aio/stereo_net.hpp"
#include "oracles.hpp"

using namespace aio;

namespace {

std::int64_t conv(std::int64_t ci, std::int64_t co, std::int64_t k) { return ci * co * k * k + co; }

std::int64_t unit(std::int64_t ci, std::int64_t co) {
  return conv(ci, co, 3) + conv(co, co, 3) + (ci != co ? conv(ci, co, 1) : 0);
}

// Parameter count from the layer list alone.
std::int64_t expected_params(const ModelConfig& m) {
  const auto& C = m.context_channels;
  const auto h1 = m.feature_hidden[0], h2 = m.feature_hidden[1];
  const std::int64_t T = static_cast<std::int64_t>(m.teachers.size());
  std::int64_t n = conv(3, h1, 7) + 2 * unit(h1, h1) + conv(h1, h2, 3) + 2 * unit(h2, h2) + conv(h2, m.feature_channels, 1);
  n += conv(3, C[0], 7);
  for (int i = 0; i < 3; ++i) {
    n += unit(C[i], C[i + 1]) + unit(C[i + 1], C[i + 1]);
    n += T * conv(C[i], C[i + 1], 3);
    n += T * (conv(C[i + 1], m.align_hidden, 3) + conv(m.align_hidden, m.align_hidden, 3) +
              conv(m.align_hidden, m.teacher_channels, 3));
    n += conv(C[i], T, 3);
  }
  const auto ch = m.hidden_channels;
  n += 2 * conv(C[3], ch, 1);
  n += conv(m.corr_features() + 1, ch, 3) + conv(ch, ch - 1, 3) + 3 * conv(3 * ch, ch, 3) + conv(ch, ch, 3) +
       conv(ch, 1, 3);
  return n;
}

ModelConfig tiny() {
  ModelConfig c;
  c.context_channels = {4, 6, 8, 10};
  c.feature_hidden = {4, 6};
  c.feature_channels = 8;
  c.hidden_channels = 6;
  c.max_disparity = 4;
  c.corr_levels = 2;
  c.corr_radius = 2;
  c.align_hidden = 4;
  c.teacher_channels = 16;
  return c;
}

// The delta head starts at zero, which makes untrained predictions identically 0.
void randomise_delta_head(StereoModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const NamedParam& p : m.params().params())
    if (p.name.rfind("update.head2.", 0) == 0) {
      Tensor t = p.tensor;
      t.assign(oracle::random_tensor(rng, t.shape(), -0.2, 0.4).to_vector());
    }
}

StereoSample random_sample(std::uint64_t seed, std::int64_t h, std::int64_t w) {
  std::mt19937_64 rng(seed);
  StereoSample s;
  s.id = "s" + std::to_string(seed);
  s.left = oracle::random_tensor(rng, {3, h, w}, 0, 1, DType::f32);
  s.right = oracle::random_tensor(rng, {3, h, w}, 0, 1, DType::f32);
  s.gt_disparity = Tensor::full({h, w}, 3.0, DType::f32);
  s.valid = Tensor::full({h, w}, 1.0, DType::f32);
  return s;
}

std::vector<std::vector<double>> run(const StereoModel& m, const StereoSample& s, int iters) {
  std::vector<std::vector<double>> out;
  for (const Tensor& p : m.forward(s, nullptr, iters).predictions) out.push_back(p.to_vector());
  return out;
}

}  // namespace

TEST(StereoModel, ParameterCounts) {
  StereoModel m(ModelConfig{}, Ablation::full, 1);
  EXPECT_EQ(m.params().count(), expected_params(ModelConfig{}));
  EXPECT_EQ(m.params().count(), 1'243'641);
  EXPECT_EQ(m.params().count(ParamGroup::alignment), 249'552);
  StereoModel t(tiny(), Ablation::baseline, 1);
  EXPECT_EQ(t.params().count(), expected_params(tiny()));
}

TEST(StereoModel, InitialisationDependsOnlyOnSeed) {
  StereoModel a(tiny(), Ablation::full, 5), b(tiny(), Ablation::baseline, 5), c(tiny(), Ablation::full, 6);
  ASSERT_EQ(a.params().params().size(), b.params().params().size());
  bool differs = false;
  for (std::size_t i = 0; i < a.params().params().size(); ++i) {
    EXPECT_EQ(a.params().params()[i].tensor.to_vector(), b.params().params()[i].tensor.to_vector());
    differs |= a.params().params()[i].tensor.to_vector() != c.params().params()[i].tensor.to_vector();
  }
  EXPECT_TRUE(differs);
}

TEST(FeatureNet, SharedWeightsAndQuarterResolution) {
  ParamStore store(2);
  const FeatureNet net = make_feature_net(store, ModelConfig{});
  StereoSample s = random_sample(1, 64, 64);
  s.right = s.left.clone();
  const FeaturePair p = feature_net(net, s);
  EXPECT_EQ(p.left.shape(), (Shape{64, 16, 16}));
  EXPECT_EQ(p.left.to_vector(), p.right.to_vector());
  EXPECT_THROW(feature_net(net, random_sample(2, 30, 64)), ContractError);
}

TEST(Correlation, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (auto [C, H, W, D] : {std::array<int, 4>{8, 3, 10, 4}, {5, 4, 7, 7}, {64, 2, 16, 16}}) {
    FeaturePair p{oracle::random_tensor(rng, {C, H, W}), oracle::random_tensor(rng, {C, H, W})};
    const CorrelationPyramid pyr = build_corr(p, D, 4);
    ASSERT_EQ(pyr.levels.size(), 4u);
    for (int j = 0; j < 4; ++j) EXPECT_EQ(pyr.levels[j].dim(2), (D + (1 << j) - 1) >> j);
    const auto want = oracle::correlation(p.left.to_vector(), p.right.to_vector(), C, H, W, D);
    const auto got = pyr.levels[0].to_vector();
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-5 * std::max(1.0, std::abs(want[i])));
  }
}

TEST(Correlation, SelfCorrelationAtZero) {
  std::mt19937_64 rng(4);
  Tensor f = oracle::random_tensor(rng, {6, 3, 5});
  const Tensor v = build_corr({f, f}, 3, 1).levels[0];
  for (std::int64_t y = 0; y < 3; ++y)
    for (std::int64_t x = 0; x < 5; ++x) {
      double n = 0;
      for (std::int64_t c = 0; c < 6; ++c) n += f.at({c, y, x}) * f.at({c, y, x});
      EXPECT_NEAR(v.at({y, x, 0}), n / std::sqrt(6.0), 1e-12);
    }
}

TEST(Correlation, RecoversARigidShift) {
  std::mt19937_64 rng(5);
  const int C = 64, H = 8, W = 32, D = 8;
  for (int s = 0; s < D; ++s) {
    Tensor l = oracle::random_tensor(rng, {C, H, W});
    Tensor r = oracle::random_tensor(rng, {C, H, W});
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x + s < W; ++x) r.set({c, y, x}, l.at({c, y, x + s}));
    const Tensor v = build_corr({l, r}, D, 1).levels[0];
    int hits = 0, total = 0;
    for (int y = 0; y < H; ++y)
      for (int x = D; x < W; ++x) {
        int best = 0;
        for (int z = 1; z < D; ++z)
          if (v.at({y, x, z}) > v.at({y, x, best})) best = z;
        hits += best == s;
        ++total;
      }
    EXPECT_GE(hits, 0.99 * total) << "shift " << s;
  }
}

TEST(Correlation, RangeChecks) {
  Tensor f = Tensor::zeros({2, 2, 4}, DType::f32);
  EXPECT_THROW(build_corr({f, f}, 0), ContractError);
  EXPECT_THROW(build_corr({f, f}, 5), ContractError);
  EXPECT_THROW(build_corr({f, Tensor::zeros({2, 2, 5}, DType::f32)}, 2), ContractError);
}

TEST(CorrLookup, IndexingAndInterpolation) {
  DTypeScope f64(DType::f64);
  std::mt19937_64 rng(6);
  const int H = 2, W = 9, D = 6, r = 1, L = 2;
  FeaturePair p{oracle::random_tensor(rng, {4, H, W}), oracle::random_tensor(rng, {4, H, W})};
  const CorrelationPyramid pyr = build_corr(p, D, L);
  const Tensor& v0 = pyr.levels[0];
  auto lookup = [&](double d) { return corr_lookup(pyr, Tensor::full({1, H, W}, d), r); };

  Tensor at0 = lookup(0.0);
  ASSERT_EQ(at0.shape(), (Shape{L * (2 * r + 1), H, W}));
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      EXPECT_EQ(at0.at({0, y, x}), v0.at({y, x, 0}));
      EXPECT_EQ(at0.at({1, y, x}), v0.at({y, x, 0}));
      EXPECT_EQ(at0.at({2, y, x}), v0.at({y, x, 1}));
    }
  Tensor at3 = lookup(3.0);
  Tensor at15 = lookup(1.5);
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      EXPECT_EQ(at3.at({1, y, x}), v0.at({y, x, 3}));
      EXPECT_NEAR(at15.at({1, y, x}), 0.5 * (v0.at({y, x, 1}) + v0.at({y, x, 2})), 1e-12);
      // level 1 centre sits at d/2 = 1.5 on the pooled axis
      EXPECT_NEAR(at3.at({4, y, x}), 0.5 * (pyr.levels[1].at({y, x, 1}) + pyr.levels[1].at({y, x, 2})), 1e-12);
    }
  EXPECT_THROW(corr_lookup(pyr, Tensor::zeros({1, H, W}), 0), ContractError);
}

class Gru : public ::testing::Test {
 protected:
  void SetUp() override {
    ModelConfig cfg = tiny();
    ub = make_update_block(store, cfg);
    std::mt19937_64 rng(7);
    state.hidden = oracle::random_tensor(rng, {6, 5, 7}, -0.9, 0.9, DType::f32);
    state.context_inject = oracle::random_tensor(rng, {6, 5, 7}, 0, 1, DType::f32);
    state.disparity = oracle::random_tensor(rng, {1, 5, 7}, 0, 2, DType::f32);
    corr = oracle::random_tensor(rng, {cfg.corr_features(), 5, 7}, -1, 1, DType::f32);
  }

  void force_z(double bias) {
    ub.convz.weight.fill(0.0);
    ub.convz.bias.fill(bias);
  }

  ParamStore store{8};
  UpdateBlock ub;
  GruState state;
  Tensor corr;
};

TEST_F(Gru, ClosedGateKeepsHidden) {
  force_z(-1e4);
  const GruResult r = gru_update(ub, state, corr);
  EXPECT_EQ(r.state.hidden.to_vector(), state.hidden.to_vector());
}

TEST_F(Gru, OpenGateTakesCandidate) {
  force_z(1e4);
  ub.convq.weight.fill(0.0);
  ub.convq.bias.fill(0.3);
  const GruResult r = gru_update(ub, state, corr);
  for (double v : r.state.hidden.to_vector()) EXPECT_NEAR(v, std::tanh(0.3), 1e-6);
}

TEST_F(Gru, DisparityIsClampedSum) {
  const GruResult r = gru_update(ub, state, corr);
  const auto d = state.disparity.to_vector(), delta = r.delta.to_vector(), nd = r.state.disparity.to_vector();
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_FLOAT_EQ(nd[i], std::max(0.0f, static_cast<float>(d[i] + delta[i])));
  ub.head2.weight.fill(0.0);
  ub.head2.bias.fill(-100.0);
  for (double v : gru_update(ub, state, corr).state.disparity.to_vector()) EXPECT_EQ(v, 0.0);
  for (double v : r.state.hidden.to_vector()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(r.state.context_inject.to_vector(), state.context_inject.to_vector());
}

TEST(Upsample, ConstantAndRamp) {
  for (double v : upsample_disparity(Tensor::full({1, 3, 5}, 2.0, DType::f32)).to_vector()) EXPECT_EQ(v, 8.0);
  EXPECT_EQ(upsample_disparity(Tensor::zeros({1, 3, 5}, DType::f32)).shape(), (Shape{12, 20}));
  Tensor ramp = Tensor::zeros({1, 4, 6}, DType::f64);
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 6; ++x) ramp.set({0, y, x}, 0.5 * x + 0.25 * y + 1.0);
  const Tensor up = upsample_disparity(ramp);
  for (std::int64_t Y = 0; Y < 16; ++Y)
    for (std::int64_t X = 0; X < 24; ++X) {
      const double u = (X + 0.5) / 4.0 - 0.5, v = (Y + 0.5) / 4.0 - 0.5;
      if (u < 0 || u > 5 || v < 0 || v > 3) continue;
      EXPECT_NEAR(up.at({Y, X}), 4.0 * (0.5 * u + 0.25 * v + 1.0), 1e-12);
    }
  EXPECT_THROW(upsample_disparity(Tensor::zeros({2, 3, 3}, DType::f32)), DimensionError);
}

TEST(Forward, CountsFinitenessAndDeterminism) {
  StereoModel m(tiny(), Ablation::full, 9);
  randomise_delta_head(m, 9);
  const StereoSample s = random_sample(10, 16, 32);
  const auto one = run(m, s, 1);
  ASSERT_EQ(one.size(), 1u);
  const auto a = run(m, s, 4), b = run(m, s, 4);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[0], one[0]);
  for (const auto& p : a) {
    ASSERT_EQ(p.size(), 16u * 32u);
    for (double v : p) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
  EXPECT_THROW(m.forward(s, nullptr, 0), ContractError);
}

TEST(Forward, DefaultModelShapes) {
  StereoModel m(ModelConfig{}, Ablation::full, 1);
  const ForwardResult r = m.forward(random_sample(11, 64, 64), nullptr, 2);
  ASSERT_EQ(r.predictions.size(), 2u);
  EXPECT_EQ(r.predictions[1].shape(), (Shape{64, 64}));
  EXPECT_EQ(r.aux.blocks[2].gates.shape(), (Shape{3, 16, 16}));
}

TEST(Forward, ZeroExpertsMatchBaselineBitForBit) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    StereoModel m(tiny(), Ablation::full, seed);
    randomise_delta_head(m, seed);
    for (const NamedParam& p : m.params().params())
      if (p.name.find(".expert.") != std::string::npos) Tensor(p.tensor).fill(0.0);
    const StereoSample s = random_sample(20 + seed, 16, 32);
    const auto full = run(m, s, 3);
    m.set_ablation(Ablation::baseline);
    EXPECT_EQ(run(m, s, 3), full) << seed;
  }
}

TEST(Forward, UntrainedModelStartsAtZeroAndReceivesGradient) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    StereoModel m(tiny(), Ablation::baseline, seed);
    const StereoSample s = random_sample(40 + seed, 16, 32);
    const ForwardResult r = m.forward(s, nullptr, 2);
    for (const Tensor& p : r.predictions)
      for (double v : p.to_vector()) ASSERT_EQ(v, 0.0);
    backward(loss(LossKind::l1, r.predictions.back(), s.gt_disparity));
    for (const NamedParam& p : m.params().params())
      if (p.name == "update.head2.bias") {
        ASSERT_TRUE(p.tensor.has_grad());
        EXPECT_LT(p.tensor.grad().to_vector()[0], 0.0) << seed;
      }
  }
}
