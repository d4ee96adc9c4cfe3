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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tumorseg/volume.hpp"

namespace tumorseg {

/// Binary voxel set; every value is 0 or 1.
struct BinaryMask {
  Shape3 shape;
  std::vector<std::uint8_t> data;
};

BinaryMask binarize(const MaskVolume& mask, const LabelSelector& cls);

struct OverlapCounts {
  std::int64_t a = 0;             // |A|
  std::int64_t b = 0;             // |B|
  std::int64_t intersection = 0;  // |A n B|
  std::int64_t union_size = 0;    // |A u B|
};

OverlapCounts overlap_counts(const BinaryMask& a, const BinaryMask& b);

/// 2|A n B| / (|A| + |B|); 1.0 when both are empty.
double dice_coefficient(const BinaryMask& a, const BinaryMask& b);
double dice_coefficient(const OverlapCounts& c);

/// 1 - |A n B| / |A u B|. Throws kUndefinedMetric when both are empty.
double voe(const BinaryMask& a, const BinaryMask& b);
double voe(const OverlapCounts& c);

/// (|A| - |B|) / |B|. Throws kUndefinedMetric when B is empty.
double rvd(const BinaryMask& a, const BinaryMask& b);
double rvd(const OverlapCounts& c);

/// Component id per voxel (0 = background, ids from 1) and component sizes
/// (sizes[0] unused). `per_slice` selects 2D 4-connectivity within each
/// axial slice, otherwise 3D 6-connectivity.
struct ComponentMap {
  std::vector<std::int32_t> ids;
  std::vector<std::int64_t> sizes;
};

ComponentMap label_components(const BinaryMask& mask, bool per_slice);

/// Removes components smaller than `min_area` voxels.
BinaryMask filter_small_components(const BinaryMask& mask, int min_area,
                                   bool per_slice);

struct VolumeMetrics {
  std::string volume_id;
  std::string class_name;
  double dice = 0;
  std::optional<double> voe;  // empty when both masks are empty
  std::optional<double> rvd;  // empty when the ground truth is empty
  int min_area_filter = 0;
};

/// Binarizes both volumes on `cls`. With min_area > 0, ground-truth
/// components (per-slice, 4-connected) below min_area are removed, and a
/// predicted component is dropped when it touches only removed ground truth.
/// Predicted components touching no ground truth at all are kept.
VolumeMetrics evaluate_volume(const MaskVolume& pred, const MaskVolume& gt,
                              const LabelSelector& cls,
                              const std::string& class_name, int min_area,
                              const std::string& volume_id = {});

VolumeMetrics evaluate_volume(const MaskVolume& pred, const MaskVolume& gt,
                              int class_label, int min_area);

struct MetricSummary {
  double mean = 0;
  double std = 0;  // population
  int count = 0;   // entries with a defined value
};

struct ClassSummary {
  std::string class_name;
  int volumes = 0;
  MetricSummary dice;
  MetricSummary voe;
  MetricSummary rvd;
};

/// One row per class in first-appearance order; within a class the means
/// are accumulated in volume_id order so the result is order-independent.
std::vector<ClassSummary> aggregate(const std::vector<VolumeMetrics>& results);

}  // namespace tumorseg
