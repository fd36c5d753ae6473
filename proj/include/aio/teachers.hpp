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
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "aio/sample.hpp"
#include "aio/tensor.hpp"

namespace aio {

enum class TeacherKind { dino, sam, depth };

/// "dino", "sam", "depth". These are also the filename prefixes of FTC
/// teacher files.
std::string teacher_name(TeacherKind kind);
/// Inverse of teacher_name; throws ContractError on unknown names.
TeacherKind parse_teacher(const std::string& name);

constexpr int kNumStages = 3;
constexpr std::int64_t kSynthChannels = 16;

struct TeacherFeatures {
  TeacherKind kind = TeacherKind::dino;
  int stage = 1;  // 1..3, matching student context block i
  Tensor map;     // [C_t, h_t, w_t]

  std::int64_t channels() const { return map.dim(0); }
};

/// Frozen teacher. Implementations are stateless after construction, so
/// stage_features may be called concurrently.
class TeacherProvider {
 public:
  virtual ~TeacherProvider() = default;
  virtual TeacherKind kind() const = 0;
  virtual TeacherFeatures stage_features(const StereoSample& sample, int stage) const = 0;
  /// Channel count of every map this provider returns.
  virtual std::int64_t channels() const = 0;
};

/// Resolution of the synthetic teachers at `stage`: H / 2^(stage-1),
/// rounded up at each halving.
std::int64_t stage_extent(std::int64_t full, int stage);

// Synthetic stand-ins. All return kSynthChannels channels at stage_extent
// resolution, in the dtype of sample.left. Computed without autograd.

/// Gaussian-blurred colour and luminance statistics (sigma 1,2,4,8) times a
/// centred Gaussian saliency mask. `seed` is accepted for interface symmetry;
/// the map does not depend on it.
TeacherFeatures synth_dino(const StereoSample& sample, int stage, std::uint64_t seed);

/// Finite-difference edge responses of the left image: signed and absolute
/// horizontal, vertical and diagonal gradients, magnitude, doubled-angle
/// orientation, per-colour magnitudes and blurred absolute responses.
TeacherFeatures synth_sam(const StereoSample& sample, int stage, std::uint64_t seed);

/// Functions of the min-max normalised ground-truth disparity plus smooth
/// seeded noise of amplitude `noise` x (channel std). Throws ContractError
/// when the sample has no ground truth.
TeacherFeatures synth_depth(const StereoSample& sample, int stage, std::uint64_t seed, double noise = 0.1);

/// Saliency mask used by synth_dino at an h x w grid:
///   exp(-0.5 ((u - 0.5)/0.25)^2 - 0.5 ((v - 0.5)/0.25)^2),
/// u = (x + 0.5)/w, v = (y + 0.5)/h.
double saliency_weight(std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w);

class SyntheticTeacher final : public TeacherProvider {
 public:
  SyntheticTeacher(TeacherKind kind, std::uint64_t seed, double depth_noise = 0.1)
      : kind_(kind), seed_(seed), depth_noise_(depth_noise) {}

  TeacherKind kind() const override { return kind_; }
  TeacherFeatures stage_features(const StereoSample& sample, int stage) const override;
  std::int64_t channels() const override { return kSynthChannels; }

 private:
  TeacherKind kind_;
  std::uint64_t seed_;
  double depth_noise_;
};

/// `<dir>/<kind>_stage<i>_<sampleid>.ftc`
std::filesystem::path teacher_file_path(const std::filesystem::path& dir, TeacherKind kind, int stage,
                                        const std::string& sample_id);

/// Reads one FTC teacher map. The tensor must be rank 3; if the file name
/// follows the naming convention its kind and stage must agree with the
/// declared ones (ContractError otherwise).
TeacherFeatures load_teacher_file(const std::filesystem::path& path, TeacherKind kind, int stage);

/// Teacher backed by precomputed FTC files in one directory.
class FileTeacher final : public TeacherProvider {
 public:
  FileTeacher(TeacherKind kind, std::filesystem::path dir, std::int64_t channels)
      : kind_(kind), dir_(std::move(dir)), channels_(channels) {}

  TeacherKind kind() const override { return kind_; }
  TeacherFeatures stage_features(const StereoSample& sample, int stage) const override;
  std::int64_t channels() const override { return channels_; }

 private:
  TeacherKind kind_;
  std::filesystem::path dir_;
  std::int64_t channels_;
};

using TeacherSet = std::vector<std::shared_ptr<const TeacherProvider>>;

}  // namespace aio
