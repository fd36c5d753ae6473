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
#include <string>
#include <vector>

#include "aio/sample.hpp"

namespace aio {

/// Axis-aligned rectangle [x0,x1) x [y0,y1) in left-image coordinates.
struct Layer {
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int disparity = 0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::int64_t height = 48, width = 96;
  double density = 0.5;    // probability that a texel is a dot
  int d_max = 8;
  double depth_cue = 0.25;  // weight of the disparity-dependent brightness term
  std::vector<Layer> layers;  // front to back; disparities non-increasing

  /// Throws ContractError when a layer leaves the image, disparities are out
  /// of [0, d_max] or the layers are not ordered front to back.
  void validate() const;
};

/// Random rectangles (1..max_layers) in front of a full-frame background
/// layer whose disparity is drawn from [1, d_max/2].
SceneSpec random_scene(std::uint64_t seed, std::int64_t height, std::int64_t width, int d_max, double density,
                       int max_layers, double depth_cue);

/// Renders a random-dot pair. Each surface (background = index 0, layers
/// 1..n) carries its own texture in left-image coordinates, so the right
/// image at x - d shows exactly the left value at x wherever the same surface
/// is visible in both views. Values are quantised to k/255 and replicated to
/// three channels. valid = 0 where x - d leaves the frame or the matching
/// right pixel is covered by a nearer surface.
StereoSample gen_rds(const SceneSpec& spec);

struct ManifestItem {
  std::string id;
  std::filesystem::path left, right, gt, valid;  // absolute, or relative to the manifest directory
};

struct DatasetManifest {
  std::string split;  // "train" or "val"
  std::vector<ManifestItem> items;
};

/// {"split": ..., "items": [{"id","left","right","gt","valid"}]}
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
/// Relative paths are resolved against the manifest's directory. Throws
/// IoError for missing files and ContractError for duplicate ids.
DatasetManifest read_manifest(const std::filesystem::path& path);

StereoSample load_sample(const ManifestItem& item);
void save_sample(const StereoSample& s, const ManifestItem& item);

struct DataConfig {
  std::filesystem::path dir = "data";
  std::int64_t height = 48, width = 96;
  int d_max = 8;
  double density = 0.5;
  double depth_cue = 0.25;
  int num_train = 64;
  int num_val = 16;
  int max_layers = 3;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// Seed of sample i: train uses seed + i, val uses seed + 1'000'000 + i.
std::uint64_t sample_seed(const DataConfig& cfg, bool val, int index);

struct DatasetPaths {
  std::filesystem::path train, val;
  bool generated = false;  // false when existing files were kept
};

DatasetPaths dataset_paths(const DataConfig& cfg);

/// Writes <dir>/{train,val}/<id>_{left,right,valid}.pgm, <id>_gt.pfm and the
/// manifests <dir>/train.json, <dir>/val.json. Existing manifests are kept
/// unless `force`.
DatasetPaths build_dataset(const DataConfig& cfg, bool force = false);

}  // namespace aio
