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

#include "aio/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

#include "aio/errors.hpp"
#include "aio/hash.hpp"
#include "aio/image_io.hpp"
#include "aio/ops.hpp"

namespace aio {

namespace fs = std::filesystem;
using nlohmann::json;

void SceneSpec::validate() const {
  if (height <= 0 || width <= 0) throw ContractError("scene size must be positive");
  if (!(density > 0.0 && density <= 1.0)) throw ContractError("dot density must be in (0,1]");
  if (d_max < 0 || d_max > 64) throw ContractError("d_max must be in [0,64]");
  if (depth_cue < 0.0 || depth_cue >= 1.0) throw ContractError("depth cue must be in [0,1)");
  int prev = d_max;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const std::string tag = "layer " + std::to_string(i);
    if (l.x0 < 0 || l.y0 < 0 || l.x1 > width || l.y1 > height || l.x0 >= l.x1 || l.y0 >= l.y1)
      throw ContractError(tag + " [" + std::to_string(l.x0) + "," + std::to_string(l.x1) + ")x[" +
                          std::to_string(l.y0) + "," + std::to_string(l.y1) + ") is outside the " +
                          std::to_string(width) + "x" + std::to_string(height) + " image");
    if (l.disparity < 0 || l.disparity > d_max)
      throw ContractError(tag + " disparity " + std::to_string(l.disparity) + " outside [0," + std::to_string(d_max) + "]");
    if (l.disparity > prev) throw ContractError(tag + " is nearer than the layer in front of it");
    prev = l.disparity;
  }
}

SceneSpec random_scene(std::uint64_t seed, std::int64_t height, std::int64_t width, int d_max, double density,
                       int max_layers, double depth_cue) {
  SceneSpec spec;
  spec.seed = seed;
  spec.height = height;
  spec.width = width;
  spec.d_max = d_max;
  spec.density = density;
  spec.depth_cue = depth_cue;
  std::mt19937_64 rng(mix_seed(seed, 0x5ce7e));
  auto uniform_int = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  // Full-frame background first, then nearer rectangles.
  const int d_bg = static_cast<int>(uniform_int(std::min(1, d_max), std::max(std::min(1, d_max), d_max / 2)));
  const int n = static_cast<int>(uniform_int(1, std::max(1, max_layers)));
  for (int i = 0; i < n; ++i) {
    Layer l;
    const auto w = uniform_int(std::max<std::int64_t>(1, width / 4), std::max<std::int64_t>(1, width / 2));
    const auto h = uniform_int(std::max<std::int64_t>(1, height / 4), std::max<std::int64_t>(1, height / 2));
    l.x0 = uniform_int(0, width - w);
    l.y0 = uniform_int(0, height - h);
    l.x1 = l.x0 + w;
    l.y1 = l.y0 + h;
    l.disparity = static_cast<int>(uniform_int(std::min(d_bg + 1, d_max), d_max));
    spec.layers.push_back(l);
  }
  spec.layers.push_back({0, 0, width, height, d_bg});
  std::stable_sort(spec.layers.begin(), spec.layers.end(),
                   [](const Layer& a, const Layer& b) { return a.disparity > b.disparity; });
  return spec;
}

namespace {

// Surface texture in left-image coordinates, quantised to k/255.
std::uint8_t texel(const SceneSpec& spec, std::size_t surface, int disparity, std::int64_t x, std::int64_t y) {
  std::uint64_t h = mix_seed(spec.seed, surface);
  h = mix_seed(h, static_cast<std::uint64_t>(y));
  h = mix_seed(h, static_cast<std::uint64_t>(x));
  const double u1 = static_cast<double>(h >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(mix_seed(h, 1) >> 11) * 0x1.0p-53;
  const double dot = u1 < spec.density ? 0.6 + 0.4 * u2 : 0.25 * u2;
  const double cue = spec.d_max > 0 ? static_cast<double>(disparity) / spec.d_max : 0.0;
  const double v = (1.0 - spec.depth_cue) * dot + spec.depth_cue * cue;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

StereoSample gen_rds(const SceneSpec& spec) {
  spec.validate();
  const std::int64_t H = spec.height, W = spec.width;
  // surface 0 is the background; surface i+1 is layers[i]
  auto left_surface = [&](std::int64_t x, std::int64_t y) -> std::size_t {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const Layer& l = spec.layers[i];
      if (y >= l.y0 && y < l.y1 && x >= l.x0 && x < l.x1) return i + 1;
    }
    return 0;
  };
  // right pixel xr sees a layer whose left footprint contains xr + d
  auto right_surface = [&](std::int64_t xr, std::int64_t y) -> std::size_t {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const Layer& l = spec.layers[i];
      if (y >= l.y0 && y < l.y1 && xr + l.disparity >= l.x0 && xr + l.disparity < l.x1) return i + 1;
    }
    return 0;
  };
  auto disparity_of = [&](std::size_t s) { return s == 0 ? 0 : spec.layers[s - 1].disparity; };

  std::vector<std::uint8_t> left(static_cast<std::size_t>(H * W)), right(left.size());
  std::vector<float> gt(left.size()), valid(left.size());
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y * W + x);
      const std::size_t sl = left_surface(x, y);
      const int d = disparity_of(sl);
      left[idx] = texel(spec, sl, d, x, y);
      gt[idx] = static_cast<float>(d);
      const bool in_frame = x - d >= 0;
      valid[idx] = in_frame && right_surface(x - d, y) == sl ? 1.0f : 0.0f;

      const std::size_t sr = right_surface(x, y);
      const int dr = disparity_of(sr);
      right[idx] = texel(spec, sr, dr, x + dr, y);
    }
  }

  auto to_image = [&](const std::vector<std::uint8_t>& g) {
    std::vector<float> v(3 * g.size());
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < g.size(); ++i) v[c * g.size() + i] = static_cast<float>(g[i] / 255.0);
    return Tensor::from_floats({3, H, W}, std::move(v)).to(default_dtype());
  };
  StereoSample s;
  s.id = "rds_" + std::to_string(spec.seed);
  s.left = to_image(left);
  s.right = to_image(right);
  s.gt_disparity = Tensor::from_floats({H, W}, std::move(gt)).to(default_dtype());
  s.valid = Tensor::from_floats({H, W}, std::move(valid)).to(default_dtype());
  return s;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  json items = json::array();
  for (const auto& it : m.items)
    items.push_back({{"id", it.id},
                     {"left", it.left.generic_string()},
                     {"right", it.right.generic_string()},
                     {"gt", it.gt.generic_string()},
                     {"valid", it.valid.generic_string()}});
  const json doc = {{"split", m.split}, {"items", items}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  DatasetManifest m;
  const fs::path base = path.parent_path();
  try {
    m.split = doc.at("split").get<std::string>();
    std::set<std::string> seen;
    for (const auto& j : doc.at("items")) {
      ManifestItem it;
      it.id = j.at("id").get<std::string>();
      if (!seen.insert(it.id).second) throw ContractError("duplicate id '" + it.id + "' in '" + path.string() + "'");
      auto resolve = [&](const char* key) {
        fs::path p = j.at(key).get<std::string>();
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) throw IoError("manifest '" + path.string() + "' lists missing file '" + p.string() + "'");
        return p;
      };
      it.left = resolve("left");
      it.right = resolve("right");
      it.gt = resolve("gt");
      it.valid = resolve("valid");
      m.items.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw IoError("manifest '" + path.string() + "' does not follow the schema: " + e.what());
  }
  return m;
}

StereoSample load_sample(const ManifestItem& item) {
  StereoSample s;
  s.id = item.id;
  auto grey3 = [](const fs::path& p) {
    const Gray8 g = read_pgm(p);
    std::vector<double> v(3 * g.pixels.size());
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < g.pixels.size(); ++i) v[c * g.pixels.size() + i] = static_cast<float>(g.pixels[i] / 255.0);
    return Tensor::from_vector({3, g.height, g.width}, v);
  };
  s.left = grey3(item.left);
  s.right = grey3(item.right);
  s.gt_disparity = read_pfm(item.gt).to(default_dtype());
  const Gray8 mask = read_pgm(item.valid);
  std::vector<double> v(mask.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.pixels[i] > 127 ? 1.0 : 0.0;
  s.valid = Tensor::from_vector({mask.height, mask.width}, v);
  s.validate();
  return s;
}

void save_sample(const StereoSample& s, const ManifestItem& item) {
  s.validate();
  auto first_channel = [&](const Tensor& img) {
    NoGradGuard no_grad;
    return reshape(slice(img, 0, 0, 1), {s.height(), s.width()});
  };
  write_pgm(item.left, quantize_unit(first_channel(s.left)));
  write_pgm(item.right, quantize_unit(first_channel(s.right)));
  write_pfm(item.gt, s.gt_disparity);
  write_pgm(item.valid, quantize_unit(s.valid));
}

void DataConfig::validate() const {
  if (height <= 0 || width <= 0 || height % 4 != 0 || width % 4 != 0)
    throw ConfigError("data.height and data.width must be positive multiples of 4");
  if (d_max < 0 || d_max > 64) throw ConfigError("data.d_max must be in [0,64]");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("data.density must be in (0,1]");
  if (!(depth_cue >= 0.0 && depth_cue < 1.0)) throw ConfigError("data.depth_cue must be in [0,1)");
  if (num_train < 0 || num_val < 0) throw ConfigError("data.num_train and data.num_val must be >= 0");
  if (max_layers < 1) throw ConfigError("data.max_layers must be >= 1");
}

std::uint64_t sample_seed(const DataConfig& cfg, bool val, int index) {
  return cfg.seed + (val ? 1'000'000ULL : 0ULL) + static_cast<std::uint64_t>(index);
}

DatasetPaths dataset_paths(const DataConfig& cfg) { return {cfg.dir / "train.json", cfg.dir / "val.json", false}; }

DatasetPaths build_dataset(const DataConfig& cfg, bool force) {
  cfg.validate();
  DatasetPaths paths = dataset_paths(cfg);
  if (!force && fs::exists(paths.train) && fs::exists(paths.val)) return paths;
  for (bool val : {false, true}) {
    DatasetManifest m;
    m.split = val ? "val" : "train";
    const int n = val ? cfg.num_val : cfg.num_train;
    for (int i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04d", m.split.c_str(), i);
      ManifestItem rel{id, fs::path(m.split) / (std::string(id) + "_left.pgm"),
                       fs::path(m.split) / (std::string(id) + "_right.pgm"),
                       fs::path(m.split) / (std::string(id) + "_gt.pfm"),
                       fs::path(m.split) / (std::string(id) + "_valid.pgm")};
      ManifestItem abs{rel.id, cfg.dir / rel.left, cfg.dir / rel.right, cfg.dir / rel.gt, cfg.dir / rel.valid};
      const SceneSpec spec = random_scene(sample_seed(cfg, val, i), cfg.height, cfg.width, cfg.d_max, cfg.density,
                                          cfg.max_layers, cfg.depth_cue);
      StereoSample s = gen_rds(spec);
      s.id = id;
      save_sample(s, abs);
      m.items.push_back(rel);
    }
    write_manifest(val ? paths.val : paths.train, m);
  }
  paths.generated = true;
  return paths;
}

}  // namespace aio
