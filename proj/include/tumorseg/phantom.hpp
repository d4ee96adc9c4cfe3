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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tumorseg/volume.hpp"

namespace tumorseg {

struct PhantomSpec {
  Shape3 shape{32, 64, 64};
  Spacing3 spacing{2.0, 1.0, 1.0};
  double organ_hu = 90.0;
  double tumor_hu = 40.0;
  double background_hu = -80.0;
  double noise_sigma = 10.0;
  int n_tumors = 2;
  std::array<double, 2> tumor_radius_range{3.0, 5.0};  // voxels
  std::uint64_t seed = 0;
  std::string identifier = "phantom";

  void validate() const;
};

/// Ellipsoid in voxel coordinates, rotated by `angle` in the axial plane.
struct Ellipsoid {
  std::array<double, 3> center{};      // (z, y, x)
  std::array<double, 3> semi_axes{};   // (z, y, x) before rotation
  double angle = 0.0;                  // radians

  bool contains(double z, double y, double x) const;
};

struct Sphere {
  std::array<double, 3> center{};
  double radius = 0.0;

  bool contains(double z, double y, double x) const;
};

struct Phantom {
  CTVolume volume;
  MaskVolume mask;
  Ellipsoid organ;
  std::vector<Sphere> tumors;
};

Phantom generate_phantom(const PhantomSpec& spec);

struct PhantomFiles {
  std::filesystem::path volume;
  std::filesystem::path mask;
};

/// Writes `<id>.nii.gz` and `<id>_seg.nii.gz` into `directory`.
PhantomFiles write_phantom(const CTVolume& volume, const MaskVolume& mask,
                           const std::filesystem::path& directory);

}  // namespace tumorseg
