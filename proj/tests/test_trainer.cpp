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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aio/config.hpp"
#include "aio/errors.hpp"
#include "aio/ftc.hpp"
#include "aio/ops.hpp"
#include "aio/trainer.hpp"
#include "oracles.hpp"

using namespace aio;
namespace fs = std::filesystem;

namespace {

Tensor row(std::initializer_list<double> v, DType dt = DType::f64) {
  return Tensor::from_vector({1, static_cast<std::int64_t>(v.size())}, v, dt);
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.context_channels = {4, 6, 8, 10};
  c.feature_hidden = {4, 6};
  c.feature_channels = 8;
  c.hidden_channels = 6;
  c.max_disparity = 4;
  c.corr_levels = 2;
  c.corr_radius = 2;
  c.align_hidden = 4;
  c.train_iters = 3;
  c.eval_iters = 4;
  return c;
}

RunConfig tiny_run(const std::string& name) {
  RunConfig cfg;
  const fs::path root = fs::temp_directory_path() / "aio_trainer_tests";
  cfg.seed = 5;
  cfg.data.dir = root / "data";
  cfg.data.num_train = 3;
  cfg.data.num_val = 2;
  cfg.data.height = 16;
  cfg.data.width = 32;
  cfg.data.d_max = 8;
  cfg.model = tiny_model();
  cfg.output_dir = root / name;
  cfg.train.steps = 4;
  cfg.train.val_every = 2;
  cfg.train.val_probe = 2;
  fs::remove_all(cfg.output_dir);
  build_dataset(cfg.data);
  return cfg;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// Loss whose gradient with respect to `p` is exactly `g`.
Tensor linear_loss(const Tensor& p, const std::vector<double>& g) {
  return sum(mul(p, Tensor::from_vector(p.shape(), g, p.dtype())));
}

}  // namespace

TEST(PredictionLoss, WeightedSumOfMaskedL1) {
  const Tensor gt = row({0, 0, 0, 0}), valid = row({1, 1, 1, 0});
  std::vector<double> per;
  const Tensor one = prediction_loss({row({1, 2, 3, 100})}, gt, valid, 0.9, &per);
  EXPECT_DOUBLE_EQ(one.item(), 2.0);
  ASSERT_EQ(per.size(), 1u);
  const Tensor two = prediction_loss({row({1, 1, 1, 7}), row({0.5, 0.5, 0.5, 7})}, gt, valid, 0.9, &per);
  EXPECT_NEAR(two.item(), 1.4, 1e-15);
  EXPECT_EQ(per, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(prediction_loss({gt, gt, gt}, gt, valid, 0.9).item(), 0.0);
  EXPECT_THROW(prediction_loss({gt}, gt, row({0, 0, 0, 0}), 0.9), EmptyReductionError);
  EXPECT_THROW(prediction_loss({}, gt, valid, 0.9), ContractError);
}

TEST(PredictionLoss, GradientReachesEveryIterate) {
  Tensor a = row({1, 2}), b = row({3, 4});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  backward(prediction_loss({a, b}, row({0, 0}), row({1, 1}), 0.5));
  EXPECT_EQ(a.grad_vector(), (std::vector<double>{0.25, 0.25}));
  EXPECT_EQ(b.grad_vector(), (std::vector<double>{0.5, 0.5}));
}

TEST(TotalLoss, DeeperBlocksWeighMore) {
  const auto s = [](double v) { return Tensor::scalar(v, DType::f64); };
  EXPECT_NEAR(total_loss(s(1), {s(1), s(1), s(1)}, 0.9).item(), 3.439, 1e-12);
  EXPECT_NEAR(total_loss_value(1, {1, 1, 1}, 0.9), 3.439, 1e-12);
  EXPECT_EQ(total_loss(s(2.5), {s(0), s(0), s(0)}, 0.9).item(), 2.5);
  EXPECT_EQ(total_loss(s(2.5), {Tensor(), Tensor(), Tensor()}, 0.9).item(), 2.5);
  EXPECT_EQ(total_loss(s(2.5), {s(7), s(8), s(9)}, 0.0).item(), 2.5);
  EXPECT_NEAR(total_loss_value(0, {1, 0, 0}, 0.5), 0.125, 1e-15);
  EXPECT_NEAR(total_loss_value(0, {0, 0, 1}, 0.5), 0.5, 1e-15);
}

TEST(Schedule, OneCycleShape) {
  const std::int64_t T = 500;
  const double peak = 2e-4, W = 5;
  EXPECT_EQ(one_cycle_lr(0, T, peak, 0.01), 0.0);
  EXPECT_EQ(one_cycle_lr(5, T, peak, 0.01), peak);
  EXPECT_EQ(one_cycle_lr(T, T, peak, 0.01), 0.0);
  const std::int64_t mid = (5 + T) / 2;
  EXPECT_NEAR(one_cycle_lr(mid, T, peak, 0.01), peak * (T - mid) / (T - W), 1e-18);
  double prev = -1;
  for (std::int64_t s = 0; s <= T; ++s) {
    const double lr = one_cycle_lr(s, T, peak, 0.01);
    EXPECT_LE(lr, peak);
    const double want = s <= W ? peak * s / W : peak * (T - s) / (T - W);
    EXPECT_NEAR(lr, want, 1e-18);
    if (s > 0) {
      EXPECT_LE(std::abs(lr - prev), peak / W + 1e-18);
    }
    prev = lr;
  }
}

TEST(Schedule, AlignmentGroupStartsHigherAndDecaysFaster) {
  const std::int64_t T = 1000;
  const double rho = align_decay_rate(T, 0.1);
  EXPECT_NEAR(std::pow(rho, 100.0), 0.5, 1e-12);
  EXPECT_EQ(align_lr_ratio(0, T, 3.0, 0.1), 3.0);
  EXPECT_GT(align_lr_ratio(0, T, 3.0, 0.1) * one_cycle_lr(1, T, 2e-4, 0.01), one_cycle_lr(1, T, 2e-4, 0.01));
  for (std::int64_t s = 1; s <= T; ++s) EXPECT_LT(align_lr_ratio(s, T, 3.0, 0.1), align_lr_ratio(s - 1, T, 3.0, 0.1));
  EXPECT_NEAR(align_lr_ratio(300, T, 3.0, 0.1), 3.0 / 8.0, 1e-12);
}

TEST(AdamW, MatchesScalarOracle) {
  DTypeScope f64(DType::f64);
  ParamStore store(1);
  Tensor p = store.constant("p", {1}, 0.5, ParamGroup::main);
  Tensor q = store.constant("q", {1}, -2.0, ParamGroup::alignment);
  AdamW opt(store, {0.9, 0.999, 1e-8, 0.01});
  oracle::AdamScalar op{0.5}, oq{-2.0};
  const double grads[] = {0.3, -1.2, 0.05, 2.0, 0.0, -0.7};
  for (int t = 0; t < 6; ++t) {
    store.zero_grad();
    backward(add(linear_loss(p, {grads[t]}), linear_loss(q, {-grads[t]})));
    opt.step(1e-2, 3e-2);
    op.step(grads[t], 1e-2, 0.01);
    oq.step(-grads[t], 3e-2, 0.01);
    EXPECT_NEAR(p.item(), op.p, 1e-14) << t;
    EXPECT_NEAR(q.item(), oq.p, 1e-14) << t;
  }
  EXPECT_EQ(opt.steps(), 6);
}

TEST(AdamW, FixedPointAndDecoupledDecay) {
  DTypeScope f64(DType::f64);
  ParamStore store(2);
  Tensor p = store.uniform("p", {3, 2}, 1.0, ParamGroup::main);
  const auto start = p.to_vector();
  AdamW still(store, {0.9, 0.999, 1e-8, 0.0});
  for (int t = 0; t < 3; ++t) {
    store.zero_grad();
    backward(linear_loss(p, std::vector<double>(6, 0.0)));
    still.step(0.1, 0.1);
  }
  EXPECT_EQ(p.to_vector(), start);

  AdamW decay(store, {0.9, 0.999, 1e-8, 0.5});
  for (int t = 0; t < 3; ++t) {
    store.zero_grad();
    backward(linear_loss(p, std::vector<double>(6, 0.0)));
    decay.step(0.1, 0.1);
  }
  for (std::size_t i = 0; i < start.size(); ++i) EXPECT_NEAR(p.to_vector()[i], start[i] * std::pow(0.95, 3), 1e-15);
}

TEST(AdamW, ParametersWithoutGradientAreSkipped) {
  DTypeScope f64(DType::f64);
  ParamStore store(3);
  Tensor a = store.constant("a", {1}, 1.0, ParamGroup::main);
  Tensor b = store.constant("b", {1}, 1.0, ParamGroup::main);
  AdamW opt(store, {0.9, 0.999, 1e-8, 0.1});
  backward(linear_loss(a, {1.0}));
  opt.step(0.1, 0.1);
  EXPECT_NE(a.item(), 1.0);
  EXPECT_EQ(b.item(), 1.0);
  EXPECT_EQ(opt.first_moments()[1].item(), 0.0);
}

TEST(AdamW, NonFiniteGradientNamesTheParameter) {
  DTypeScope f64(DType::f64);
  ParamStore store(4);
  store.constant("fine", {1}, 1.0, ParamGroup::main);
  Tensor bad = store.constant("broken.weight", {1}, 1.0, ParamGroup::main);
  AdamW opt(store, {});
  backward(linear_loss(bad, {std::nan("")}));
  try {
    opt.step(0.1, 0.1);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.weight"), std::string::npos);
  }
  EXPECT_EQ(bad.item(), 1.0);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  StereoModel m(tiny_model(), Ablation::no_selection, 3);
  AdamW opt(m.params(), {});
  opt.set_steps(17);
  std::mt19937_64 rng(1);
  for (Tensor& t : opt.first_moments()) t.copy_from(oracle::random_tensor(rng, t.shape(), -1, 1, t.dtype()));
  const Checkpoint ck = make_checkpoint(m, &opt, 42);
  EXPECT_EQ(ck.tensors.size(), 3 * m.params().params().size());
  const fs::path p = fs::temp_directory_path() / "aio_ck_rt.ftck";
  save_checkpoint(p, ck);
  const auto bytes = read_file_bytes(p);
  const Checkpoint back = load_checkpoint(p);
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(back.config_hash, model_config_hash(tiny_model()));
  save_checkpoint(p, back);
  EXPECT_EQ(read_file_bytes(p), bytes);

  auto fresh = model_from_checkpoint(back);
  EXPECT_EQ(fresh->ablation(), Ablation::no_selection);
  for (std::size_t i = 0; i < m.params().params().size(); ++i)
    EXPECT_EQ(fresh->params().params()[i].tensor.to_vector(), m.params().params()[i].tensor.to_vector());
  StereoModel other(tiny_model(), Ablation::full, 99);
  AdamW other_opt(other.params(), {});
  restore_checkpoint(back, other, &other_opt);
  EXPECT_EQ(other_opt.first_moments()[0].to_vector(), opt.first_moments()[0].to_vector());
  EXPECT_EQ(make_checkpoint(other, &other_opt, 42).tensors.back().second.to_vector(), ck.tensors.back().second.to_vector());
}

TEST(Checkpoint, MismatchesAndCorruption) {
  StereoModel m(tiny_model(), Ablation::full, 3);
  const auto bytes = encode_checkpoint(make_checkpoint(m, nullptr, 0));
  ModelConfig wider = tiny_model();
  wider.hidden_channels = 8;
  StereoModel w(wider, Ablation::full, 3);
  EXPECT_THROW(restore_checkpoint(decode_checkpoint(bytes), w, nullptr), ContractError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint({bytes.begin(), bytes.end() - 10}), FormatError);
}

TEST(Train, ZeroStepsLeavesTheInitialisation) {
  RunConfig cfg = tiny_run("zero");
  cfg.train.steps = 0;
  const TrainResult r = train(cfg);
  EXPECT_EQ(r.initial_val_epe, r.final_val_epe);
  const Checkpoint ck = load_checkpoint(r.checkpoint);
  EXPECT_EQ(ck.step, 0);
  StereoModel init(cfg.model, cfg.train.ablation, cfg.seed);
  AdamW opt(init.params(), {});
  EXPECT_EQ(encode_checkpoint(ck), encode_checkpoint(make_checkpoint(init, &opt, 0)));
  for (const auto& p : init.params().params()) {
    bool found = false;
    for (const auto& [name, t] : ck.tensors)
      if (name == "param/" + p.name) {
        found = true;
        EXPECT_EQ(t.to_vector(), p.tensor.to_vector()) << p.name;
      }
    EXPECT_TRUE(found) << p.name;
  }
}

TEST(Train, DeterministicLogsCheckpointsAndLossDecomposition) {
  RunConfig a = tiny_run("det_a"), b = tiny_run("det_b");
  const TrainResult ra = train(a), rb = train(b);
  EXPECT_EQ(read_file_bytes(ra.checkpoint), read_file_bytes(rb.checkpoint));
  EXPECT_EQ(read_file_bytes(ra.log), read_file_bytes(rb.log));
  EXPECT_EQ(load_checkpoint(ra.checkpoint).step, 4);

  const auto rows = read_csv(ra.log);
  const auto cols = train_log_columns(a.model);
  ASSERT_EQ(rows.size(), 5u);
  ASSERT_EQ(rows[0], cols);
  auto col = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), n) - cols.begin());
  };
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), cols.size());
    auto v = [&](const std::string& n) { return std::stod(rows[r][col(n)]); };
    const double lp = v("l1_1") * 0.81 + v("l1_2") * 0.9 + v("l1_3");
    EXPECT_NEAR(v("L_P"), lp, 1e-6 * std::max(1.0, lp));
    const double kd1 = v("kd_b1_dino") + v("kd_b1_sam") + v("kd_b1_depth");
    EXPECT_NEAR(v("L_KD_1"), kd1, 1e-6 * std::max(1.0, kd1));
    const double aio = total_loss_value(v("L_P"), {v("L_KD_1"), v("L_KD_2"), v("L_KD_3")}, 0.9);
    EXPECT_NEAR(v("L_AIO"), aio, 1e-6 * std::max(1.0, aio));
    EXPECT_EQ(rows[r][col("val_epe")].empty(), r % 2 == 1) << r;
  }
  EXPECT_EQ(std::stod(rows[1][col("lr_main")]), 0.0);
}

TEST(Train, NonFiniteLossAbortsAndKeepsLastGood) {
  RunConfig cfg = tiny_run("nan");
  cfg.train.steps = 6;
  cfg.train.warm_frac = 0.2;
  cfg.train.peak_lr = 1e30;
  cfg.train.val_every = 0;
  try {
    train(cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("last good checkpoint"), std::string::npos);
  }
  const Checkpoint ck = load_checkpoint(cfg.output_dir / "checkpoint.ftck");
  EXPECT_EQ(ck.step, 0);
}

TEST(Train, MissingDatasetIsAnIoError) {
  RunConfig cfg = tiny_run("nodata");
  cfg.data.dir = fs::temp_directory_path() / "aio_trainer_tests" / "absent";
  fs::remove_all(cfg.data.dir);
  EXPECT_THROW(train(cfg), IoError);
}
