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

#include "tumorseg/volume.hpp"

namespace tumorseg {

/// Reads a NIfTI-1 volume (.nii or .nii.gz). Axes are returned as
/// (depth, height, width) = (k, j, i) of the file's voxel grid.
CTVolume load_volume(const std::filesystem::path& path);

/// Reads an integer-valued label volume and checks it against the paired
/// volume shape and the label semantics.
MaskVolume load_mask(const std::filesystem::path& path,
                     const Shape3& expected_shape,
                     const LabelSemantics& semantics = default_label_semantics());

/// As above without a shape check.
MaskVolume load_mask(const std::filesystem::path& path,
                     const LabelSemantics& semantics = default_label_semantics());

/// Writes float32 voxels. Geometry is copied from `source_header` when set.
void write_volume(const CTVolume& volume, const std::filesystem::path& path);

/// Writes uint8 labels.
void write_mask(const MaskVolume& mask, const std::filesystem::path& path);

/// File name with .nii / .nii.gz stripped.
std::string volume_identifier(const std::filesystem::path& path);

}  // namespace tumorseg
