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
#include <optional>
#include <vector>

#include "tumorseg/volume.hpp"

namespace tumorseg {

struct AugmentConfig {
  double elastic_alpha = 34.0;  // displacement magnitude, pixels
  double elastic_sigma = 4.0;   // smoothing radius, pixels
  double max_shift = 0.1;       // fraction of the image side
  std::array<double, 2> scale_range{0.9, 1.1};
  double max_rotate_deg = 15.0;
  double probability = 0.5;

  void validate() const;
};

struct ElasticParams {
  double alpha = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

struct AffineParams {
  std::array<double, 2> shift{0.0, 0.0};  // (rows, cols) as image fractions
  double scale = 1.0;
  double rotate_deg = 0.0;
};

/// Transforms applied by one pipeline call, in application order
/// (elastic first, then affine). Replaying it reproduces the output exactly.
struct AugmentRecord {
  std::optional<ElasticParams> elastic;
  std::optional<AffineParams> affine;
};

struct AugmentResult {
  SliceSample sample;
  AugmentRecord record;
};

SliceSample elastic_transform(const SliceSample& sample, double alpha,
                              double sigma, std::uint64_t seed);

SliceSample affine_transform(const SliceSample& sample,
                             const AffineParams& params);

AugmentResult apply_pipeline(const SliceSample& sample,
                             const AugmentConfig& cfg, std::uint64_t seed);

/// Applies a recorded transform sequence to a bare mask plane.
std::vector<std::uint8_t> replay_on_mask(const std::vector<std::uint8_t>& mask,
                                         int height, int width,
                                         const AugmentRecord& record);

}  // namespace tumorseg
