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

#include <filesystem>
#include <string>
#include <vector>

#include "tumorseg/metrics.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

/// Columns volume_id, class, dice, voe, rvd, min_area_filter. Per-volume
/// rows come first (class order, then volume_id); each class then gets one
/// row with volume_id "summary" whose metric cells read "mean±std".
/// Undefined values are written as "nan".
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<VolumeMetrics>& results);

/// Reads per-volume rows back; summary rows are skipped.
std::vector<VolumeMetrics> read_metrics_csv(const std::filesystem::path& path);

/// Mean ± std per class in percent, laid out as
/// Method | VOE(%) | RVD(%) | DICE(%) | Type.
std::string format_results_table(const std::vector<ClassSummary>& summary,
                                 const std::string& method = "LinkNet-34");

/// Mean of the organ and tumor mean Dice, when both classes are present.
std::optional<double> composite_dice(const std::vector<ClassSummary>& summary,
                                     const std::string& organ_name,
                                     const std::string& tumor_name);

/// Axial slice with the most non-background voxels (first on ties).
int most_labeled_slice(const MaskVolume& mask);

/// Grayscale windowed slice with label 1 tinted green and label 2 yellow.
void write_overlay_png(const std::filesystem::path& path, const CTVolume& volume,
                       const WindowSpec& window, const MaskVolume& labels, int slice);

}  // namespace tumorseg
