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

#include "aio/data_gen.hpp"
#include "aio/errors.hpp"
#include "aio/ftc.hpp"
#include "aio/image_io.hpp"

using namespace aio;
namespace fs = std::filesystem;

namespace {

SceneSpec square_scene(int d) {
  SceneSpec s;
  s.seed = 42;
  s.height = 32;
  s.width = 48;
  s.d_max = 8;
  s.layers = {{16, 8, 32, 24, d}};
  return s;
}

// right(x - gt(x), y) == left(x, y) on every valid pixel, all channels.
std::int64_t constraint_violations(const StereoSample& s) {
  std::int64_t bad = 0;
  const auto H = s.height(), W = s.width();
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      if (s.valid.at({y, x}) == 0.0) continue;
      const auto xr = x - static_cast<std::int64_t>(s.gt_disparity.at({y, x}));
      for (std::int64_t c = 0; c < 3; ++c) bad += s.right.at({c, y, xr}) != s.left.at({c, y, x});
    }
  return bad;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "aio_data_tests" / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Rds, ZeroDisparityLayerGivesIdenticalViews) {
  SceneSpec s = square_scene(0);
  s.layers = {{0, 0, 48, 32, 0}};
  const StereoSample r = gen_rds(s);
  EXPECT_EQ(r.left.to_vector(), r.right.to_vector());
  for (double v : r.gt_disparity.to_vector()) EXPECT_EQ(v, 0.0);
  for (double v : r.valid.to_vector()) EXPECT_EQ(v, 1.0);
}

TEST(Rds, CentralSquareGeometry) {
  const int d = 4;
  const SceneSpec spec = square_scene(d);
  const StereoSample r = gen_rds(spec);
  EXPECT_EQ(r.left.shape(), (Shape{3, 32, 48}));
  const Layer& l = spec.layers[0];
  for (std::int64_t y = 0; y < 32; ++y)
    for (std::int64_t x = 0; x < 48; ++x) {
      const bool inside = y >= l.y0 && y < l.y1 && x >= l.x0 && x < l.x1;
      EXPECT_EQ(r.gt_disparity.at({y, x}), inside ? d : 0);
      // Background pixels whose match in the right view is hidden behind the
      // shifted square: a band of width d next to the square.
      const bool occluded = y >= l.y0 && y < l.y1 && x >= l.x0 - d && x < l.x0;
      const bool out_of_frame = inside && x - d < 0;
      EXPECT_EQ(r.valid.at({y, x}), (occluded || out_of_frame) ? 0.0 : 1.0) << y << "," << x;
    }
  EXPECT_EQ(constraint_violations(r), 0);
}

TEST(Rds, OutOfFrameBand) {
  SceneSpec s = square_scene(0);
  s.layers = {{0, 0, 48, 32, 3}};
  const StereoSample r = gen_rds(s);
  for (std::int64_t y = 0; y < 32; ++y)
    for (std::int64_t x = 0; x < 48; ++x) EXPECT_EQ(r.valid.at({y, x}), x < 3 ? 0.0 : 1.0);
}

TEST(Rds, DeterministicAndSeedDependent) {
  const StereoSample a = gen_rds(square_scene(4)), b = gen_rds(square_scene(4));
  EXPECT_EQ(a.left.to_vector(), b.left.to_vector());
  EXPECT_EQ(a.right.to_vector(), b.right.to_vector());
  SceneSpec other = square_scene(4);
  other.seed = 43;
  EXPECT_NE(gen_rds(other).left.to_vector(), a.left.to_vector());
}

TEST(Rds, ValuesAreQuantisedGreys) {
  const StereoSample r = gen_rds(square_scene(4));
  auto v = r.left.to_vector();
  const std::size_t n = v.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const double k = v[i] * 255.0;
    EXPECT_NEAR(k, std::round(k), 1e-4);
    EXPECT_EQ(v[i], v[n + i]);
    EXPECT_EQ(v[i], v[2 * n + i]);
  }
}

TEST(Rds, InvalidSpecsAreRejected) {
  SceneSpec s = square_scene(4);
  s.layers[0].x1 = 49;
  EXPECT_THROW(gen_rds(s), ContractError);
  s = square_scene(9);
  EXPECT_THROW(gen_rds(s), ContractError);
  s = square_scene(4);
  s.layers.push_back({0, 0, 4, 4, 6});
  EXPECT_THROW(gen_rds(s), ContractError);  // nearer layer listed behind
  s = square_scene(4);
  s.density = 0.0;
  EXPECT_THROW(gen_rds(s), ContractError);
}

TEST(Rds, RandomScenesSatisfyTheStereoConstraint) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SceneSpec spec = random_scene(seed, 48, 96, 8, 0.5, 3, 0.25);
    ASSERT_NO_THROW(spec.validate());
    const StereoSample r = gen_rds(spec);
    EXPECT_EQ(constraint_violations(r), 0) << seed;
    for (double v : r.gt_disparity.to_vector()) {
      EXPECT_GE(v, 1.0);
      EXPECT_LE(v, 8.0);
    }
  }
}

TEST(Rds, ValidMaskIsExactlyTheNonOccludedSet) {
  // Construction oracle: a left pixel is matched iff x - d is in frame and
  // no nearer layer covers x - d in the right view.
  const SceneSpec spec = random_scene(5, 32, 64, 8, 0.5, 3, 0.25);
  const StereoSample r = gen_rds(spec);
  for (std::int64_t y = 0; y < 32; ++y)
    for (std::int64_t x = 0; x < 64; ++x) {
      const int d = static_cast<int>(r.gt_disparity.at({y, x}));
      bool ok = x - d >= 0;
      for (const Layer& l : spec.layers) {
        if (l.disparity <= d) break;
        if (y >= l.y0 && y < l.y1 && x - d + l.disparity >= l.x0 && x - d + l.disparity < l.x1) ok = false;
      }
      EXPECT_EQ(r.valid.at({y, x}), ok ? 1.0 : 0.0);
    }
}

TEST(Dataset, BuildLoadAndManifest) {
  DataConfig cfg;
  cfg.dir = fresh_dir("small");
  cfg.num_train = 4;
  cfg.num_val = 2;
  cfg.height = 16;
  cfg.width = 32;
  cfg.seed = 11;
  const DatasetPaths p = build_dataset(cfg);
  EXPECT_TRUE(p.generated);
  const DatasetManifest train = read_manifest(p.train), val = read_manifest(p.val);
  EXPECT_EQ(train.split, "train");
  EXPECT_EQ(val.split, "val");
  ASSERT_EQ(train.items.size() + val.items.size(), 6u);
  for (const auto& m : {train, val})
    for (const auto& it : m.items) {
      const StereoSample s = load_sample(it);
      EXPECT_EQ(s.left.shape(), (Shape{3, 16, 32}));
      EXPECT_EQ(s.gt_disparity.shape(), (Shape{16, 32}));
      EXPECT_EQ(constraint_violations(s), 0) << it.id;
    }
  // The saved sample is the generated one.
  const StereoSample direct = gen_rds(random_scene(sample_seed(cfg, true, 1), 16, 32, cfg.d_max, cfg.density,
                                                   cfg.max_layers, cfg.depth_cue));
  const StereoSample loaded = load_sample(val.items[1]);
  EXPECT_EQ(loaded.left.to_vector(), direct.left.to_vector());
  EXPECT_EQ(loaded.gt_disparity.to_vector(), direct.gt_disparity.to_vector());
  EXPECT_EQ(loaded.valid.to_vector(), direct.valid.to_vector());
}

TEST(Dataset, SeedRangesAreDisjoint) {
  DataConfig cfg;
  cfg.seed = 3;
  EXPECT_EQ(sample_seed(cfg, false, 0), 3u);
  EXPECT_EQ(sample_seed(cfg, true, 0), 1'000'003u);
}

TEST(Dataset, RebuildIsANoOpUnlessForced) {
  DataConfig cfg;
  cfg.dir = fresh_dir("rebuild");
  cfg.num_train = 2;
  cfg.num_val = 1;
  cfg.height = 8;
  cfg.width = 16;
  build_dataset(cfg);
  const fs::path left = cfg.dir / "train" / "train_0000_left.pgm";
  const auto before = read_file_bytes(left);
  fs::remove(left);
  EXPECT_FALSE(build_dataset(cfg).generated);
  EXPECT_FALSE(fs::exists(left));
  EXPECT_TRUE(build_dataset(cfg, true).generated);
  EXPECT_EQ(read_file_bytes(left), before);
}

TEST(Dataset, ManifestErrors) {
  const fs::path dir = fresh_dir("manifests");
  fs::create_directories(dir);
  EXPECT_THROW(read_manifest(dir / "none.json"), IoError);
  DatasetManifest m{"val", {{"a", "a_l.pgm", "a_r.pgm", "a.pfm", "a_v.pgm"}, {"a", "b_l.pgm", "b_r.pgm", "b.pfm", "b_v.pgm"}}};
  write_manifest(dir / "missing.json", m);
  EXPECT_THROW(read_manifest(dir / "missing.json"), IoError);
  for (const auto& it : m.items)
    for (const auto& f : {it.left, it.right, it.gt, it.valid}) std::ofstream(dir / f).put('x');
  write_manifest(dir / "dup.json", m);
  EXPECT_THROW(read_manifest(dir / "dup.json"), ContractError);
}

TEST(Dataset, ConfigValidation) {
  DataConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.density = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DataConfig{};
  cfg.height = 46;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
