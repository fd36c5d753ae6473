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

#include "aio/teachers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "aio/errors.hpp"
#include "aio/ftc.hpp"
#include "aio/hash.hpp"

namespace aio {

namespace {

struct Plane {
  std::int64_t h = 0, w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(std::int64_t h_, std::int64_t w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<std::size_t>(h_ * w_), fill) {}
  double& operator()(std::int64_t y, std::int64_t x) { return v[static_cast<std::size_t>(y * w + x)]; }
  double operator()(std::int64_t y, std::int64_t x) const { return v[static_cast<std::size_t>(y * w + x)]; }
  // replicate border
  double at(std::int64_t y, std::int64_t x) const {
    return (*this)(std::clamp<std::int64_t>(y, 0, h - 1), std::clamp<std::int64_t>(x, 0, w - 1));
  }
};

Plane channel_of(const Tensor& img, std::int64_t c) {
  Plane p(img.dim(1), img.dim(2));
  const auto all = img.to_vector();
  std::copy_n(all.begin() + c * p.h * p.w, p.h * p.w, p.v.begin());
  return p;
}

Plane map_plane(const Plane& a, auto fn) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = fn(a.v[i]);
  return out;
}

Plane gaussian_blur(const Plane& src, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& x : k) x /= total;
  Plane tmp(src.h, src.w), out(src.h, src.w);
  for (std::int64_t y = 0; y < src.h; ++y)
    for (std::int64_t x = 0; x < src.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * src.at(y, x + i);
      tmp(y, x) = s;
    }
  for (std::int64_t y = 0; y < src.h; ++y)
    for (std::int64_t x = 0; x < src.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(y + i, x);
      out(y, x) = s;
    }
  return out;
}

Plane box3(const Plane& src) {
  Plane out(src.h, src.w);
  for (std::int64_t y = 0; y < src.h; ++y)
    for (std::int64_t x = 0; x < src.w; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) s += src.at(y + dy, x + dx);
      out(y, x) = s / 9.0;
    }
  return out;
}

// Central differences with replicate borders.
Plane diff(const Plane& p, int dy, int dx) {
  Plane out(p.h, p.w);
  for (std::int64_t y = 0; y < p.h; ++y)
    for (std::int64_t x = 0; x < p.w; ++x) out(y, x) = 0.5 * (p.at(y + dy, x + dx) - p.at(y - dy, x - dx));
  return out;
}

Plane hypot_plane(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = std::hypot(a.v[i], b.v[i]);
  return out;
}

// Same rule as avg_pool2: odd extents replicate the last row/column.
Plane halve(const Plane& p) {
  Plane out((p.h + 1) / 2, (p.w + 1) / 2);
  for (std::int64_t y = 0; y < out.h; ++y)
    for (std::int64_t x = 0; x < out.w; ++x)
      out(y, x) = 0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                          p.at(2 * y + 1, 2 * x + 1));
  return out;
}

Plane to_stage(Plane p, int stage) {
  for (int s = 1; s < stage; ++s) p = halve(p);
  return p;
}

Plane luminance(const Tensor& img) {
  const Plane r = channel_of(img, 0), g = channel_of(img, 1), b = channel_of(img, 2);
  Plane out(r.h, r.w);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = 0.299 * r.v[i] + 0.587 * g.v[i] + 0.114 * b.v[i];
  return out;
}

void check_stage(int stage) {
  if (stage < 1 || stage > kNumStages) throw ContractError("teacher stage " + std::to_string(stage) + " not in [1,3]");
}

void check_left(const StereoSample& s) {
  if (!s.left.defined() || s.left.ndim() != 3 || s.left.dim(0) != 3)
    throw ContractError("teacher needs a [3,H,W] left image");
}

TeacherFeatures pack(TeacherKind kind, int stage, const std::vector<Plane>& planes, DType dtype) {
  const std::int64_t h = planes.front().h, w = planes.front().w;
  std::vector<double> values;
  values.reserve(planes.size() * static_cast<std::size_t>(h * w));
  for (const auto& p : planes) values.insert(values.end(), p.v.begin(), p.v.end());
  return {kind, stage, Tensor::from_vector({static_cast<std::int64_t>(planes.size()), h, w}, values, dtype)};
}

double plane_std(const Plane& p) {
  double m = 0.0;
  for (double x : p.v) m += x;
  m /= static_cast<double>(p.v.size());
  double s = 0.0;
  for (double x : p.v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(p.v.size()));
}

}  // namespace

std::string teacher_name(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::dino: return "dino";
    case TeacherKind::sam: return "sam";
    case TeacherKind::depth: return "depth";
  }
  return "?";
}

TeacherKind parse_teacher(const std::string& name) {
  for (auto k : {TeacherKind::dino, TeacherKind::sam, TeacherKind::depth})
    if (teacher_name(k) == name) return k;
  throw ContractError("unknown teacher '" + name + "' (expected dino, sam or depth)");
}

std::int64_t stage_extent(std::int64_t full, int stage) {
  for (int s = 1; s < stage; ++s) full = (full + 1) / 2;
  return full;
}

double saliency_weight(std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w) {
  const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
  const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
  const double a = (u - 0.5) / 0.25, b = (v - 0.5) / 0.25;
  return std::exp(-0.5 * a * a - 0.5 * b * b);
}

TeacherFeatures synth_dino(const StereoSample& sample, int stage, std::uint64_t /*seed*/) {
  check_stage(stage);
  check_left(sample);
  std::vector<Plane> sources = {channel_of(sample.left, 0), channel_of(sample.left, 1), channel_of(sample.left, 2),
                                luminance(sample.left)};
  std::vector<Plane> planes;
  for (const auto& src : sources)
    for (double sigma : {1.0, 2.0, 4.0, 8.0}) planes.push_back(to_stage(gaussian_blur(src, sigma), stage));
  for (auto& p : planes)
    for (std::int64_t y = 0; y < p.h; ++y)
      for (std::int64_t x = 0; x < p.w; ++x) p(y, x) *= saliency_weight(y, x, p.h, p.w);
  return pack(TeacherKind::dino, stage, planes, sample.left.dtype());
}

TeacherFeatures synth_sam(const StereoSample& sample, int stage, std::uint64_t /*seed*/) {
  check_stage(stage);
  check_left(sample);
  const Plane lum = luminance(sample.left);
  const Plane gx = diff(lum, 0, 1), gy = diff(lum, 1, 0), d1 = diff(lum, 1, 1), d2 = diff(lum, 1, -1);
  auto absp = [](const Plane& p) { return map_plane(p, [](double v) { return std::abs(v); }); };
  const Plane mag = hypot_plane(gx, gy);
  Plane cos2(lum.h, lum.w), sin2(lum.h, lum.w);
  for (std::size_t i = 0; i < mag.v.size(); ++i) {
    if (mag.v[i] > 0.0) {
      cos2.v[i] = (gx.v[i] * gx.v[i] - gy.v[i] * gy.v[i]) / mag.v[i];
      sin2.v[i] = 2.0 * gx.v[i] * gy.v[i] / mag.v[i];
    }
  }
  std::vector<Plane> planes = {absp(gx), absp(gy), absp(d1), absp(d2), gx, gy, mag, cos2, sin2};
  for (std::int64_t c = 0; c < 3; ++c) {
    const Plane ch = channel_of(sample.left, c);
    planes.push_back(hypot_plane(diff(ch, 0, 1), diff(ch, 1, 0)));
  }
  for (const Plane* p : {&gx, &gy, &d1, &d2}) planes.push_back(box3(absp(*p)));
  for (auto& p : planes) p = to_stage(std::move(p), stage);
  return pack(TeacherKind::sam, stage, planes, sample.left.dtype());
}

TeacherFeatures synth_depth(const StereoSample& sample, int stage, std::uint64_t seed, double noise) {
  check_stage(stage);
  if (!sample.gt_disparity.defined()) throw ContractError("depth teacher needs ground-truth disparity");
  const Tensor& gt = sample.gt_disparity;
  if (gt.ndim() != 2) throw ContractError("ground truth must be [H,W], got " + shape_str(gt.shape()));
  Plane n(gt.dim(0), gt.dim(1));
  n.v = gt.to_vector();
  const auto [lo, hi] = std::minmax_element(n.v.begin(), n.v.end());
  const double mn = *lo, range = *hi - *lo;
  for (auto& x : n.v) x = range > 0.0 ? (x - mn) / range : 0.0;

  const Plane b1 = gaussian_blur(n, 1.0), b2 = gaussian_blur(n, 2.0), b4 = gaussian_blur(n, 4.0);
  const Plane nx = diff(n, 0, 1), ny = diff(n, 1, 0), bx = diff(b2, 0, 1), by = diff(b2, 1, 0);
  constexpr double pi = std::numbers::pi;
  std::vector<Plane> planes = {
      n, b1, b2, b4, nx, ny, bx, by, hypot_plane(nx, ny), hypot_plane(bx, by),
      map_plane(n, [](double v) { return v * v; }),
      map_plane(n, [](double v) { return 1.0 - v; }),
      map_plane(n, [](double v) { return std::cos(pi * v); }),
      map_plane(n, [](double v) { return std::sin(pi * v); }),
      map_plane(n, [](double v) { return std::cos(2.0 * pi * v); }),
      map_plane(n, [](double v) { return std::sin(2.0 * pi * v); }),
  };
  for (auto& p : planes) p = to_stage(std::move(p), stage);

  if (noise > 0.0) {
    const std::uint64_t base = mix_seed(mix_seed(seed, fnv1a64(sample.id)), static_cast<std::uint64_t>(stage));
    for (std::size_t c = 0; c < planes.size(); ++c) {
      Plane& p = planes[c];
      const double sd = plane_std(p);
      if (sd == 0.0) continue;
      std::mt19937_64 rng(mix_seed(base, c));
      std::normal_distribution<double> normal(0.0, 1.0);
      Plane white(p.h, p.w);
      for (auto& x : white.v) x = normal(rng);
      Plane smooth = gaussian_blur(white, 2.0);
      const double ssd = plane_std(smooth);
      const double amp = ssd > 0.0 ? noise * sd / ssd : 0.0;
      for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] += amp * smooth.v[i];
    }
  }
  const DType dtype = sample.left.defined() ? sample.left.dtype() : gt.dtype();
  return pack(TeacherKind::depth, stage, planes, dtype);
}

TeacherFeatures SyntheticTeacher::stage_features(const StereoSample& sample, int stage) const {
  switch (kind_) {
    case TeacherKind::dino: return synth_dino(sample, stage, seed_);
    case TeacherKind::sam: return synth_sam(sample, stage, seed_);
    case TeacherKind::depth: return synth_depth(sample, stage, seed_, depth_noise_);
  }
  throw ContractError("unhandled teacher kind");
}

std::filesystem::path teacher_file_path(const std::filesystem::path& dir, TeacherKind kind, int stage,
                                        const std::string& sample_id) {
  return dir / (teacher_name(kind) + "_stage" + std::to_string(stage) + "_" + sample_id + ".ftc");
}

TeacherFeatures load_teacher_file(const std::filesystem::path& path, TeacherKind kind, int stage) {
  check_stage(stage);
  const std::string stem = path.filename().string();
  for (auto k : {TeacherKind::dino, TeacherKind::sam, TeacherKind::depth}) {
    for (int s = 1; s <= kNumStages; ++s) {
      const std::string prefix = teacher_name(k) + "_stage" + std::to_string(s) + "_";
      if (stem.rfind(prefix, 0) == 0 && (k != kind || s != stage))
        throw ContractError("'" + stem + "' is a " + teacher_name(k) + " stage " + std::to_string(s) +
                            " file, expected " + teacher_name(kind) + " stage " + std::to_string(stage));
    }
  }
  Tensor map = read_ftc(path);
  if (map.ndim() != 3)
    throw ContractError("teacher map '" + path.string() + "' must be rank 3, got " + shape_str(map.shape()));
  if (!all_finite(map)) throw ContractError("teacher map '" + path.string() + "' contains non-finite values");
  if (default_dtype() != DType::f32) map = map.to(default_dtype());
  return {kind, stage, map};
}

TeacherFeatures FileTeacher::stage_features(const StereoSample& sample, int stage) const {
  TeacherFeatures f = load_teacher_file(teacher_file_path(dir_, kind_, stage, sample.id), kind_, stage);
  if (f.channels() != channels_)
    throw ContractError("teacher file for '" + sample.id + "' has " + std::to_string(f.channels()) +
                        " channels, expected " + std::to_string(channels_));
  return f;
}

}  // namespace aio
