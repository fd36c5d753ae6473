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

#include "aio/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <random>

#include "json.hpp"

#include "../io/bytes.hpp"
#include "aio/errors.hpp"
#include "aio/ftc.hpp"
#include "aio/hash.hpp"
#include "aio/metrics.hpp"
#include "aio/ops.hpp"

namespace aio {

namespace fs = std::filesystem;

Tensor prediction_loss(const std::vector<Tensor>& preds, const Tensor& gt, const Tensor& valid, double gamma_p,
                       std::vector<double>* per_iter) {
  if (preds.empty()) throw ContractError("prediction_loss needs at least one prediction");
  const auto n = static_cast<int>(preds.size());
  if (per_iter) per_iter->clear();
  Tensor total;
  for (int i = 1; i <= n; ++i) {
    Tensor l = l1_loss(preds[i - 1], gt, valid);
    if (per_iter) per_iter->push_back(l.item());
    Tensor w = scale(l, std::pow(gamma_p, n - i));
    total = total.defined() ? add(total, w) : w;
  }
  return total;
}

Tensor total_loss(const Tensor& l_p, const std::array<Tensor, 3>& kd, double gamma_kd) {
  Tensor total = l_p;
  for (int j = 1; j <= 3; ++j)
    if (kd[j - 1].defined()) total = add(total, scale(kd[j - 1], std::pow(gamma_kd, 4 - j)));
  return total;
}

double total_loss_value(double l_p, const std::array<double, 3>& kd, double gamma_kd) {
  double total = l_p;
  for (int j = 1; j <= 3; ++j) total += std::pow(gamma_kd, 4 - j) * kd[j - 1];
  return total;
}

double one_cycle_lr(std::int64_t step, std::int64_t total, double peak, double warm_frac) {
  if (total <= 0) return 0.0;
  step = std::clamp<std::int64_t>(step, 0, total);
  const double warm = warm_frac * static_cast<double>(total);
  const double s = static_cast<double>(step);
  if (s <= warm) return warm > 0.0 ? peak * s / warm : peak;
  return peak * (static_cast<double>(total) - s) / (static_cast<double>(total) - warm);
}

double align_decay_rate(std::int64_t total, double half_life_frac) {
  const double half_life = std::max(1.0, half_life_frac * static_cast<double>(total));
  return std::pow(0.5, 1.0 / half_life);
}

double align_lr_ratio(std::int64_t step, std::int64_t total, double mult, double half_life_frac) {
  return mult * std::pow(align_decay_rate(total, half_life_frac), static_cast<double>(step));
}

// ---------------------------------------------------------------- AdamW

AdamW::AdamW(ParamStore& store, AdamWConfig cfg) : store_(store), cfg_(cfg) {
  for (const auto& p : store_.params()) {
    m_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
    v_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
  }
}

namespace {

template <class T>
void adamw_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, double lr, const AdamWConfig& c,
                  double bc1, double bc2) {
  auto p = param.mutable_data<T>();
  auto g = grad.data<T>();
  auto mm = m.mutable_data<T>();
  auto vv = v.mutable_data<T>();
  const double shrink = 1.0 - lr * c.weight_decay;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    const double mi = c.beta1 * mm[i] + (1.0 - c.beta1) * gi;
    const double vi = c.beta2 * vv[i] + (1.0 - c.beta2) * gi * gi;
    mm[i] = static_cast<T>(mi);
    vv[i] = static_cast<T>(vi);
    const double mhat = mi / bc1, vhat = vi / bc2;
    p[i] = static_cast<T>(p[i] * shrink - lr * mhat / (std::sqrt(vhat) + c.eps));
  }
}

}  // namespace

void AdamW::step(double lr_main, double lr_align) {
  const auto& params = store_.params();
  for (const auto& p : params) {
    if (p.tensor.has_grad() && !all_finite(p.tensor.grad()))
      throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor param = params[i].tensor;
    if (!param.has_grad()) continue;
    const double lr = params[i].group == ParamGroup::alignment ? lr_align : lr_main;
    const Tensor g = param.grad();
    if (param.dtype() == DType::f32)
      adamw_update<float>(param, g, m_[i], v_[i], lr, cfg_, bc1, bc2);
    else
      adamw_update<double>(param, g, m_[i], v_[i], lr, cfg_, bc1, bc2);
  }
}

// ----------------------------------------------------------- checkpoints

namespace {
constexpr char kCkMagic[4] = {'F', 'T', 'C', 'K'};
constexpr std::uint32_t kCkVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::vector<std::uint8_t>> blobs;
  for (const auto& [name, t] : ck.tensors) blobs.push_back(encode_ftc(t));
  io::ByteWriter w;
  w.raw(kCkMagic, 4);
  w.u32(kCkVersion);
  w.u64(static_cast<std::uint64_t>(ck.step));
  w.u64(ck.config_hash);
  w.str(ck.meta);
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    w.str(ck.tensors[i].first);
    w.u64(offset);
    w.u64(blobs[i].size());
    offset += blobs[i].size();
  }
  for (const auto& b : blobs) w.raw(b.data(), b.size());
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes, 0);
  if (r.raw(4, "checkpoint magic") != std::string(kCkMagic, 4)) throw FormatError("bad checkpoint magic", 0);
  const std::size_t ver_at = r.pos();
  if (r.u32("checkpoint version") != kCkVersion) throw FormatError("unsupported checkpoint version", ver_at);
  Checkpoint ck;
  ck.step = static_cast<std::int64_t>(r.u64("checkpoint step"));
  ck.config_hash = r.u64("checkpoint config hash");
  ck.meta = r.str("checkpoint meta");
  const std::uint32_t count = r.u32("checkpoint index");
  struct Entry {
    std::string name;
    std::uint64_t offset, size;
  };
  std::vector<Entry> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str("checkpoint index");
    e.offset = r.u64("checkpoint index");
    e.size = r.u64("checkpoint index");
    index.push_back(std::move(e));
  }
  const std::size_t base = r.pos();
  for (const auto& e : index) {
    std::size_t at = base + e.offset;
    if (at + e.size > bytes.size()) throw FormatError("checkpoint blob '" + e.name + "' is truncated", bytes.size());
    Tensor t = decode_ftc(bytes, at);
    if (at != base + e.offset + e.size) throw FormatError("checkpoint blob '" + e.name + "' has a bad size", at);
    ck.tensors.emplace_back(e.name, std::move(t));
  }
  return ck;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  // Write-then-rename so an interrupted save never clobbers the last good file.
  fs::path tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, encode_checkpoint(ck));
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

Checkpoint make_checkpoint(const StereoModel& model, const AdamW* opt, std::int64_t step) {
  Checkpoint ck;
  ck.step = step;
  ck.config_hash = model_config_hash(model.config());
  const nlohmann::json meta = {{"model", nlohmann::json::parse(model_config_json(model.config()))},
                               {"ablation", ablation_name(model.ablation())}};
  ck.meta = meta.dump();
  const auto& params = model.params().params();
  for (const auto& p : params) ck.tensors.emplace_back("param/" + p.name, p.tensor.detach());
  if (opt) {
    for (std::size_t i = 0; i < params.size(); ++i)
      ck.tensors.emplace_back("adam_m/" + params[i].name, opt->first_moments()[i]);
    for (std::size_t i = 0; i < params.size(); ++i)
      ck.tensors.emplace_back("adam_v/" + params[i].name, opt->second_moments()[i]);
  }
  return ck;
}

void restore_checkpoint(const Checkpoint& ck, StereoModel& model, AdamW* opt) {
  if (ck.config_hash != model_config_hash(model.config()))
    throw ContractError("checkpoint was written for a different model configuration");
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& [n, t] : ck.tensors)
      if (n == name) return t;
    throw ContractError("checkpoint lacks tensor '" + name + "'");
  };
  auto copy = [](Tensor dst, const Tensor& src, const std::string& name) {
    if (dst.shape() != src.shape())
      throw ContractError("checkpoint tensor '" + name + "' is " + shape_str(src.shape()) + ", model expects " +
                          shape_str(dst.shape()));
    dst.copy_from(src.to(dst.dtype()));
  };
  const auto& params = model.params().params();
  for (const auto& p : params) copy(p.tensor, find("param/" + p.name), p.name);
  if (opt) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      copy(opt->first_moments()[i], find("adam_m/" + params[i].name), params[i].name);
      copy(opt->second_moments()[i], find("adam_v/" + params[i].name), params[i].name);
    }
    opt->set_steps(ck.step);
  }
}

std::unique_ptr<StereoModel> model_from_checkpoint(const Checkpoint& ck) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ck.meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not JSON: ") + e.what(), 0);
  }
  if (!meta.contains("model") || !meta.contains("ablation"))
    throw FormatError("checkpoint metadata lacks model/ablation", 0);
  ModelConfig cfg = parse_model_config(meta["model"].dump());
  auto model = std::make_unique<StereoModel>(cfg, parse_ablation(meta["ablation"].get<std::string>()), 0);
  restore_checkpoint(ck, *model, nullptr);
  return model;
}

// ------------------------------------------------------------- training

std::vector<std::string> train_log_columns(const ModelConfig& m) {
  std::vector<std::string> cols{"step", "lr_main", "lr_align"};
  for (int i = 1; i <= m.train_iters; ++i) cols.push_back("l1_" + std::to_string(i));
  cols.push_back("L_P");
  for (int j = 1; j <= kNumStages; ++j)
    for (auto t : m.teachers) cols.push_back("kd_b" + std::to_string(j) + "_" + teacher_name(t));
  for (int j = 1; j <= kNumStages; ++j) cols.push_back("L_KD_" + std::to_string(j));
  cols.push_back("L_AIO");
  cols.push_back("val_epe");
  return cols;
}

TeacherSet make_teachers(const RunConfig& cfg) {
  TeacherSet set;
  for (auto k : cfg.model.teachers) {
    if (cfg.teacher_dir.empty())
      set.push_back(std::make_shared<SyntheticTeacher>(k, cfg.seed, cfg.teacher_noise));
    else
      set.push_back(std::make_shared<FileTeacher>(k, cfg.teacher_dir, cfg.model.teacher_channels));
  }
  return set;
}

double validation_epe(const StereoModel& model, const std::vector<StereoSample>& samples, int iters) {
  NoGradGuard no_grad;
  std::vector<MetricsReport> reports;
  for (const auto& s : samples) {
    const auto out = model.forward(s, nullptr, iters);
    reports.push_back(evaluate(out.predictions.back(), s.gt_disparity, s.valid, s.id));
  }
  return aggregate(reports).epe;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<StereoSample> load_split(const fs::path& manifest, std::size_t limit) {
  const DatasetManifest m = read_manifest(manifest);
  std::vector<StereoSample> out;
  for (const auto& it : m.items) {
    if (out.size() >= limit) break;
    out.push_back(load_sample(it));
  }
  return out;
}

bool arm_distils(Ablation a) {
  return a == Ablation::full || a == Ablation::no_selection || a == Ablation::no_fusion;
}

}  // namespace

TrainResult train(const RunConfig& cfg, const TrainProgress& progress) {
  cfg.validate();
  const TrainConfig& tc = cfg.train;
  const DatasetPaths paths = dataset_paths(cfg.data);
  if (!fs::exists(paths.train) || !fs::exists(paths.val))
    throw IoError("dataset manifests not found under '" + cfg.data.dir.string() + "'; run gen-data first");
  const auto train_set = load_split(paths.train, std::numeric_limits<std::size_t>::max());
  const auto val_set = load_split(paths.val, static_cast<std::size_t>(tc.val_probe));
  if (train_set.empty()) throw ContractError("training split is empty");
  if (val_set.empty()) throw ContractError("validation split is empty");

  const TeacherSet teachers = make_teachers(cfg);
  StereoModel model(cfg.model, tc.ablation, cfg.seed);
  AdamW opt(model.params(), {0.9, 0.999, 1e-8, tc.weight_decay});
  const bool distil = arm_distils(tc.ablation);

  fs::create_directories(cfg.output_dir);
  TrainResult result;
  result.checkpoint = cfg.output_dir / "checkpoint.ftck";
  result.log = cfg.output_dir / "train_log.csv";
  std::ofstream log(result.log, std::ios::trunc);
  if (!log) throw IoError("cannot write '" + result.log.string() + "'");
  {
    const auto cols = train_log_columns(cfg.model);
    for (std::size_t i = 0; i < cols.size(); ++i) log << (i ? "," : "") << cols[i];
    log << "\n";
  }

  save_checkpoint(result.checkpoint, make_checkpoint(model, &opt, 0));
  result.initial_val_epe = validation_epe(model, val_set, cfg.model.eval_iters);
  result.final_val_epe = result.initial_val_epe;

  std::vector<std::optional<TeacherMaps>> map_cache(train_set.size());
  std::mt19937_64 rng(mix_seed(cfg.seed, fnv1a64("sampler")));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto next_index = [&] {
    if (cursor == order.size()) {
      order.resize(train_set.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    return order[cursor++];
  };

  const int N = cfg.model.train_iters;
  const std::size_t T = cfg.model.teachers.size();
  const double inv_b = 1.0 / tc.batch_size;
  for (std::int64_t step = 0; step < tc.steps; ++step) {
    const double lr_main = one_cycle_lr(step, tc.steps, tc.peak_lr, tc.warm_frac);
    const double lr_align = lr_main * align_lr_ratio(step, tc.steps, tc.align_lr_mult, tc.align_half_life_frac);
    model.params().zero_grad();

    std::vector<double> l1(N, 0.0), kd_x(kNumStages * T, 0.0);
    std::array<double, 3> kd_block{};
    for (int b = 0; b < tc.batch_size; ++b) {
      const std::size_t idx = next_index();
      const StereoSample& s = train_set[idx];
      const TeacherMaps* maps = nullptr;
      if (distil) {
        if (!map_cache[idx]) map_cache[idx] = teacher_maps(teachers, s);
        maps = &*map_cache[idx];
      }
      const ForwardResult out = model.forward(s, maps, N);
      std::vector<double> per_iter;
      const Tensor lp = prediction_loss(out.predictions, s.gt_disparity, s.valid, tc.gamma_p, &per_iter);
      std::array<Tensor, 3> kd;
      for (int j = 0; j < kNumStages; ++j) {
        const BlockOutputs& bo = out.aux.blocks[j];
        kd[j] = bo.kd_total;
        if (bo.kd_total.defined()) {
          kd_block[j] += inv_b * bo.kd_total.item();
          for (std::size_t x = 0; x < T; ++x) kd_x[j * T + x] += inv_b * bo.kd[x].item();
        }
      }
      for (int i = 0; i < N; ++i) l1[i] += inv_b * per_iter[i];
      const Tensor loss = scale(total_loss(lp, kd, tc.gamma_kd), inv_b);
      if (!std::isfinite(loss.item()))
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (first bad op: " +
                           first_nonfinite_op(loss) + "); last good checkpoint kept at '" +
                           result.checkpoint.string() + "'");
      backward(loss);
    }
    opt.step(lr_main, lr_align);

    double l_p = 0.0;
    for (int i = 1; i <= N; ++i) l_p += std::pow(tc.gamma_p, N - i) * l1[i - 1];
    const double l_aio = total_loss_value(l_p, kd_block, tc.gamma_kd);

    double val = std::numeric_limits<double>::quiet_NaN();
    const bool last = step + 1 == tc.steps;
    if (last || (tc.val_every > 0 && (step + 1) % tc.val_every == 0)) {
      val = validation_epe(model, val_set, cfg.model.eval_iters);
      result.final_val_epe = val;
    }

    log << step << "," << fmt(lr_main) << "," << fmt(lr_align);
    for (double v : l1) log << "," << fmt(v);
    log << "," << fmt(l_p);
    for (double v : kd_x) log << "," << fmt(v);
    for (double v : kd_block) log << "," << fmt(v);
    log << "," << fmt(l_aio) << "," << (std::isnan(val) ? "" : fmt(val)) << "\n";
    log.flush();

    if (tc.checkpoint_every > 0 && (step + 1) % tc.checkpoint_every == 0) {
      const Checkpoint ck = make_checkpoint(model, &opt, step + 1);
      save_checkpoint(cfg.output_dir / ("checkpoint_" + std::to_string(step + 1) + ".ftck"), ck);
      save_checkpoint(result.checkpoint, ck);
    }
    if (progress) progress(step, tc.steps, l_aio, val);
  }
  save_checkpoint(result.checkpoint, make_checkpoint(model, &opt, tc.steps));
  result.steps = tc.steps;

  std::ofstream summary(cfg.output_dir / "train_summary.json", std::ios::trunc);
  summary << nlohmann::json{{"steps", tc.steps},
                            {"ablation", ablation_name(tc.ablation)},
                            {"initial_val_epe", result.initial_val_epe},
                            {"final_val_epe", result.final_val_epe}}
                 .dump(2)
          << "\n";
  return result;
}

}  // namespace aio
