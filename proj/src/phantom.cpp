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

#include "tumorseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tumorseg/error.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

void PhantomSpec::validate() const {
  require(shape.depth >= 1 && shape.height >= 1 && shape.width >= 1,
          ErrorCode::kInvalidArgument, "phantom shape must be positive");
  for (double s : spacing) {
    require(std::isfinite(s) && s > 0, ErrorCode::kInvalidArgument,
            "phantom spacing must be positive");
  }
  require(noise_sigma >= 0 && std::isfinite(noise_sigma),
          ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  require(n_tumors >= 0, ErrorCode::kInvalidArgument, "n_tumors must be >= 0");
  require(tumor_radius_range[0] > 0 &&
              tumor_radius_range[0] <= tumor_radius_range[1],
          ErrorCode::kInvalidArgument, "tumor radius range must be 0 < lo <= hi");
  require(organ_hu != tumor_hu && organ_hu != background_hu &&
              tumor_hu != background_hu,
          ErrorCode::kInvalidArgument,
          "organ, tumor and background HU must be pairwise distinct");
}

bool Ellipsoid::contains(double z, double y, double x) const {
  const double dz = z - center[0];
  const double dy = y - center[1];
  const double dx = x - center[2];
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double u = c * dy + s * dx;
  const double v = -s * dy + c * dx;
  const double q = (dz * dz) / (semi_axes[0] * semi_axes[0]) +
                   (u * u) / (semi_axes[1] * semi_axes[1]) +
                   (v * v) / (semi_axes[2] * semi_axes[2]);
  return q <= 1.0;
}

bool Sphere::contains(double z, double y, double x) const {
  const double dz = z - center[0];
  const double dy = y - center[1];
  const double dx = x - center[2];
  return dz * dz + dy * dy + dx * dx <= radius * radius;
}

namespace {

constexpr int kOrganAttempts = 200;
constexpr int kTumorAttempts = 2000;

std::size_t count_inside(const Ellipsoid& e, const Shape3& shape) {
  std::size_t n = 0;
  for (int z = 0; z < shape.depth; ++z)
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x)
        if (e.contains(z, y, x)) ++n;
  return n;
}

Ellipsoid place_organ(const Shape3& shape, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = static_cast<double>(shape.voxel_count());
  const std::array<double, 3> extent{static_cast<double>(shape.depth),
                                     static_cast<double>(shape.height),
                                     static_cast<double>(shape.width)};
  for (int attempt = 0; attempt < kOrganAttempts; ++attempt) {
    Ellipsoid e;
    e.semi_axes[0] = extent[0] * (0.30 + 0.15 * unit(gen));
    e.semi_axes[1] = extent[1] * (0.28 + 0.14 * unit(gen));
    e.semi_axes[2] = extent[2] * (0.28 + 0.14 * unit(gen));
    e.angle = (unit(gen) - 0.5) * std::numbers::pi / 3.0;
    const double radial = std::max(e.semi_axes[1], e.semi_axes[2]);
    const std::array<double, 3> reach{e.semi_axes[0], radial, radial};
    bool fits = true;
    for (int a = 0; a < 3; ++a) {
      const double lo = reach[a] + 0.5;
      const double hi = extent[a] - 1.5 - reach[a];
      if (hi < lo) {
        e.center[a] = (extent[a] - 1.0) / 2.0;
        fits = fits && (reach[a] <= (extent[a] - 1.0) / 2.0);
      } else {
        const double mid = (extent[a] - 1.0) / 2.0;
        const double jitter = std::min(0.1 * extent[a], (hi - lo) / 2.0);
        e.center[a] = mid + (2.0 * unit(gen) - 1.0) * jitter;
      }
    }
    if (!fits) continue;
    const double fraction = static_cast<double>(count_inside(e, shape)) / total;
    if (fraction >= 0.10 && fraction <= 0.40) return e;
  }
  fail(ErrorCode::kInvalidArgument,
       "cannot fit an organ ellipsoid with 10-40% volume fraction in " +
           to_string(shape));
}

bool sphere_inside(const Sphere& s, const Ellipsoid& organ, const Shape3& shape) {
  const int r = static_cast<int>(std::ceil(s.radius));
  const int cz = static_cast<int>(std::lround(s.center[0]));
  const int cy = static_cast<int>(std::lround(s.center[1]));
  const int cx = static_cast<int>(std::lround(s.center[2]));
  for (int z = cz - r - 1; z <= cz + r + 1; ++z)
    for (int y = cy - r - 1; y <= cy + r + 1; ++y)
      for (int x = cx - r - 1; x <= cx + r + 1; ++x) {
        if (!s.contains(z, y, x)) continue;
        if (z < 0 || y < 0 || x < 0 || z >= shape.depth || y >= shape.height ||
            x >= shape.width)
          return false;
        if (!organ.contains(z, y, x)) return false;
      }
  return true;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 gen(derive_seed(spec.seed, "phantom-geometry"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Phantom ph;
  ph.organ = place_organ(spec.shape, gen);

  const auto& e = ph.organ;
  const double radial = std::max(e.semi_axes[1], e.semi_axes[2]);
  for (int t = 0; t < spec.n_tumors; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < kTumorAttempts && !placed; ++attempt) {
      Sphere s;
      s.radius = spec.tumor_radius_range[0] +
                 (spec.tumor_radius_range[1] - spec.tumor_radius_range[0]) *
                     unit(gen);
      s.center[0] = e.center[0] + (2 * unit(gen) - 1) * e.semi_axes[0];
      s.center[1] = e.center[1] + (2 * unit(gen) - 1) * radial;
      s.center[2] = e.center[2] + (2 * unit(gen) - 1) * radial;
      if (!sphere_inside(s, e, spec.shape)) continue;
      bool disjoint = true;
      for (const auto& o : ph.tumors) {
        const double d = std::hypot(s.center[0] - o.center[0],
                                    s.center[1] - o.center[1],
                                    s.center[2] - o.center[2]);
        disjoint = disjoint && d >= s.radius + o.radius + 1.0;
      }
      if (!disjoint) continue;
      ph.tumors.push_back(s);
      placed = true;
    }
    require(placed, ErrorCode::kInvalidArgument,
            "cannot place " + std::to_string(spec.n_tumors) +
                " disjoint tumors inside the organ after bounded retries");
  }

  const Shape3& sh = spec.shape;
  ph.mask.shape = sh;
  ph.mask.spacing = spec.spacing;
  ph.mask.identifier = spec.identifier + "_seg";
  ph.mask.labels.assign(sh.voxel_count(), 0);
  ph.volume.shape = sh;
  ph.volume.spacing = spec.spacing;
  ph.volume.identifier = spec.identifier;
  ph.volume.voxels.resize(sh.voxel_count());

  std::mt19937_64 noise_gen(derive_seed(spec.seed, "phantom-noise"));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int z = 0; z < sh.depth; ++z)
    for (int y = 0; y < sh.height; ++y)
      for (int x = 0; x < sh.width; ++x) {
        std::uint8_t label = 0;
        if (e.contains(z, y, x)) {
          label = 1;
          for (const auto& s : ph.tumors) {
            if (s.contains(z, y, x)) label = 2;
          }
        }
        const double base = label == 2   ? spec.tumor_hu
                            : label == 1 ? spec.organ_hu
                                         : spec.background_hu;
        const double n = spec.noise_sigma > 0 ? spec.noise_sigma * noise(noise_gen)
                                              : 0.0;
        const std::size_t i = sh.index(z, y, x);
        ph.mask.labels[i] = label;
        ph.volume.voxels[i] = static_cast<float>(base + n);
      }
  return ph;
}

PhantomFiles write_phantom(const CTVolume& volume, const MaskVolume& mask,
                           const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  require(!ec, ErrorCode::kIo, "cannot create directory " + directory.string());
  PhantomFiles files;
  files.volume = directory / (volume.identifier + ".nii.gz");
  files.mask = directory / (volume.identifier + "_seg.nii.gz");
  write_volume(volume, files.volume);
  write_mask(mask, files.mask);
  return files;
}

}  // namespace tumorseg
