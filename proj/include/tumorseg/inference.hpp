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

#include <vector>

#include "tumorseg/checkpoint.hpp"
#include "tumorseg/network.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

struct PredictOptions {
  double threshold = 0.5;
  int batch_size = 16;
  /// Network input size; 0 keeps the native slice size.
  int height = 0;
  int width = 0;
};

/// Per-voxel foreground probabilities at native resolution, (depth, H, W).
/// Slices are resized to the network size bilinearly and back bilinearly.
std::vector<float> predict_probabilities(const SegNetwork& net, const CTVolume& volume,
                                         const WindowSpec& window, int k,
                                         const PredictOptions& opts = {});

/// Binary mask: slice i is (probability > threshold) at network resolution,
/// resized back to the native slice by nearest neighbour. Labels are {0, 1}.
MaskVolume predict_volume(const SegNetwork& net, const CTVolume& volume,
                          const WindowSpec& window, int k,
                          const PredictOptions& opts = {});

/// predict_volume with the window, k and input size stored in a checkpoint.
MaskVolume predict_volume(const LoadedModel& model, const CTVolume& volume,
                          double threshold = 0.5, int batch_size = 16);

/// Label 2 where tumor and organ, 1 where organ only, 0 elsewhere.
MaskVolume combine_organ_tumor(const MaskVolume& organ, const MaskVolume& tumor);

}  // namespace tumorseg
