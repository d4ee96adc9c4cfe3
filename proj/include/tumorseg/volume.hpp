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
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tumorseg {

/// Voxel grid extents in (depth, height, width) order; width varies fastest.
struct Shape3 {
  int depth = 0;
  int height = 0;
  int width = 0;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(depth) * height * width;
  }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::size_t index(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * height + y) * width + x;
  }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& shape);

/// Raw 348-byte NIfTI-1 header kept so that outputs can mirror input geometry.
using NiftiHeaderBytes = std::array<std::uint8_t, 348>;

/// mm per voxel along (depth, height, width).
using Spacing3 = std::array<double, 3>;

struct CTVolume {
  Shape3 shape;
  Spacing3 spacing{1.0, 1.0, 1.0};
  std::vector<float> voxels;  // Hounsfield units
  std::string identifier;
  std::optional<NiftiHeaderBytes> source_header;

  float at(int z, int y, int x) const { return voxels[shape.index(z, y, x)]; }
  void validate() const;
};

using LabelSemantics = std::map<int, std::string>;

LabelSemantics default_label_semantics();

struct MaskVolume {
  Shape3 shape;
  Spacing3 spacing{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> labels;
  LabelSemantics semantics = default_label_semantics();
  std::string identifier;
  std::optional<NiftiHeaderBytes> source_header;

  std::uint8_t at(int z, int y, int x) const {
    return labels[shape.index(z, y, x)];
  }
  void validate() const;
};

/// Set of mask labels that form the positive class of a binary target.
class LabelSelector {
 public:
  LabelSelector() = default;
  static LabelSelector single(int label);
  /// Organ region including any lesion nested inside it (labels 1 and 2).
  static LabelSelector organ();
  static LabelSelector tumor();

  LabelSelector& add(int label);
  bool contains(int label) const {
    return label >= 0 && label < 256 && bits_[static_cast<std::size_t>(label)];
  }
  std::vector<int> labels() const;

 private:
  std::bitset<256> bits_;
};

struct WindowSpec {
  double hu_min = -200.0;
  double hu_max = 250.0;

  static WindowSpec liver() { return {-200.0, 250.0}; }
  static WindowSpec kidney() { return {-512.0, 512.0}; }
  void validate() const;
};

/// CT volume after HU windowing; values lie in [0, 1].
struct WindowedVolume {
  Shape3 shape;
  std::vector<float> values;
  std::string identifier;
};

/// One 2D example: a k-channel stack of adjacent slices plus the binary
/// mask of the center slice. Image layout is (channel, row, column).
struct SliceSample {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<float> image;
  std::vector<std::uint8_t> mask;
  std::string volume_id;
  int slice_index = 0;

  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  void validate() const;
};

WindowedVolume window_hu(const CTVolume& volume, const WindowSpec& window);

/// Maps a single HU value through the window.
float window_value(double hu, const WindowSpec& window);

/// One sample per axial slice. Out-of-range neighbours replicate the edge
/// slice. The mask is 1 where the center-slice label equals `target_label`.
std::vector<SliceSample> extract_slices(const WindowedVolume& volume,
                                        const MaskVolume& mask,
                                        int target_label, int k);

std::vector<SliceSample> extract_slices(const WindowedVolume& volume,
                                        const MaskVolume& mask,
                                        const LabelSelector& target, int k);

SliceSample extract_slice(const WindowedVolume& volume, const MaskVolume& mask,
                          const LabelSelector& target, int slice_index, int k);

/// Image-only stack for inference; mask left empty.
SliceSample extract_image_stack(const WindowedVolume& volume, int slice_index,
                                int k);

/// Plain 2D axial plane of a windowed volume.
std::vector<float> axial_plane(const WindowedVolume& volume, int slice_index);

/// Half-pixel-centred bilinear resampling of one plane.
std::vector<float> resize_bilinear(const std::vector<float>& plane, int height,
                                   int width, int out_height, int out_width);

std::vector<std::uint8_t> resize_nearest(const std::vector<std::uint8_t>& plane,
                                         int height, int width, int out_height,
                                         int out_width);

/// Resizes every channel bilinearly and the mask by nearest neighbour.
SliceSample resize_sample(const SliceSample& sample, int out_height,
                          int out_width);

}  // namespace tumorseg
