// Copyright 2026 The tumorseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/phantom.hpp"

namespace tumorseg {
namespace {

using testing::TempDir;
using testing::thrown_code;

TEST(Phantom, DeterministicPerSeed) {
  PhantomSpec s;
  s.seed = 42;
  const auto a = generate_phantom(s);
  const auto b = generate_phantom(s);
  EXPECT_EQ(a.volume.voxels, b.volume.voxels);
  EXPECT_EQ(a.mask.labels, b.mask.labels);
  s.seed = 43;
  EXPECT_NE(generate_phantom(s).volume.voxels, a.volume.voxels);
}

TEST(Phantom, GeometryContainment) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PhantomSpec s;
    s.seed = seed;
    s.n_tumors = 3;
    const auto p = generate_phantom(s);
    ASSERT_EQ(p.tumors.size(), 3u);
    std::size_t organ = 0;
    for (int z = 0; z < s.shape.depth; ++z)
      for (int y = 0; y < s.shape.height; ++y)
        for (int x = 0; x < s.shape.width; ++x) {
          const auto l = p.mask.at(z, y, x);
          if (l == 2) {
            EXPECT_TRUE(p.organ.contains(z, y, x));
          }
          organ += l >= 1;
        }
    const double frac = static_cast<double>(organ) / s.shape.voxel_count();
    EXPECT_GE(frac, 0.10);
    EXPECT_LE(frac, 0.40);
  }
}

TEST(Phantom, NoTumors) {
  PhantomSpec s;
  s.n_tumors = 0;
  const auto p = generate_phantom(s);
  for (auto l : p.mask.labels) EXPECT_NE(l, 2);
}

TEST(Phantom, NoiselessIntensitiesMatchLabels) {
  PhantomSpec s;
  s.noise_sigma = 0;
  const auto p = generate_phantom(s);
  const double want[3] = {s.background_hu, s.organ_hu, s.tumor_hu};
  for (std::size_t i = 0; i < p.mask.labels.size(); ++i)
    EXPECT_EQ(p.volume.voxels[i], static_cast<float>(want[p.mask.labels[i]]));
}

TEST(Phantom, NoiseMeanWithinThreeStandardErrors) {
  PhantomSpec s;
  s.seed = 9;
  const auto p = generate_phantom(s);
  double sum[3] = {0, 0, 0};
  double n[3] = {0, 0, 0};
  for (std::size_t i = 0; i < p.mask.labels.size(); ++i) {
    sum[p.mask.labels[i]] += p.volume.voxels[i];
    n[p.mask.labels[i]] += 1;
  }
  const double want[3] = {s.background_hu, s.organ_hu, s.tumor_hu};
  for (int l = 0; l < 3; ++l) {
    ASSERT_GT(n[l], 0);
    EXPECT_NEAR(sum[l] / n[l], want[l], 3 * s.noise_sigma / std::sqrt(n[l])) << l;
  }
}

TEST(Phantom, ImpossiblePlacementFails) {
  PhantomSpec s;
  s.shape = {16, 16, 16};
  s.n_tumors = 50;
  s.tumor_radius_range = {5.0, 6.0};
  EXPECT_EQ(thrown_code([&] { generate_phantom(s); }), ErrorCode::kInvalidArgument);
}

TEST(Phantom, SpecValidation) {
  PhantomSpec s;
  s.noise_sigma = -1;
  EXPECT_THROW(generate_phantom(s), Error);
  s = {};
  s.tumor_radius_range = {5.0, 3.0};
  EXPECT_THROW(generate_phantom(s), Error);
}

TEST(Phantom, WrittenFilesReload) {
  TempDir dir("phantom");
  PhantomSpec s;
  s.shape = {8, 32, 32};
  s.n_tumors = 1;
  s.tumor_radius_range = {1.5, 2.5};
  s.identifier = "ph";
  const auto p = generate_phantom(s);
  const auto files = write_phantom(p.volume, p.mask, dir.path());
  const auto v = load_volume(files.volume);
  const auto m = load_mask(files.mask, v.shape);
  EXPECT_EQ(v.voxels, p.volume.voxels);
  EXPECT_EQ(m.labels, p.mask.labels);
  EXPECT_NEAR(v.spacing[0], 2.0, 1e-6);
}

}  // namespace
}  // namespace tumorseg
