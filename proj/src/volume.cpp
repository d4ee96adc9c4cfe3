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

#include "tumorseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tumorseg/error.hpp"

namespace tumorseg {

std::string to_string(const Shape3& shape) {
  std::ostringstream os;
  os << "(" << shape.depth << ", " << shape.height << ", " << shape.width
     << ")";
  return os.str();
}

void CTVolume::validate() const {
  require(shape.depth >= 1 && shape.height >= 1 && shape.width >= 1,
          ErrorCode::kShapeMismatch,
          "volume shape must be positive, got " + to_string(shape));
  require(voxels.size() == shape.voxel_count(), ErrorCode::kShapeMismatch,
          "voxel buffer does not match shape " + to_string(shape));
  for (double s : spacing) {
    require(std::isfinite(s) && s > 0.0, ErrorCode::kFormat,
            "spacing must be positive and finite");
  }
  for (float v : voxels) {
    require(std::isfinite(v), ErrorCode::kFormat, "non-finite voxel value");
  }
}

LabelSemantics default_label_semantics() {
  return {{0, "background"}, {1, "organ"}, {2, "tumor"}};
}

void MaskVolume::validate() const {
  require(labels.size() == shape.voxel_count(), ErrorCode::kShapeMismatch,
          "label buffer does not match shape " + to_string(shape));
  std::bitset<256> seen;
  for (auto v : labels) seen.set(v);
  for (int l = 0; l < 256; ++l) {
    if (seen[static_cast<std::size_t>(l)] && !semantics.contains(l)) {
      fail(ErrorCode::kFormat,
           "label " + std::to_string(l) + " is not in the label semantics");
    }
  }
}

LabelSelector LabelSelector::single(int label) {
  LabelSelector s;
  s.add(label);
  return s;
}

LabelSelector LabelSelector::organ() {
  LabelSelector s;
  s.add(1).add(2);
  return s;
}

LabelSelector LabelSelector::tumor() { return single(2); }

LabelSelector& LabelSelector::add(int label) {
  require(label >= 0 && label < 256, ErrorCode::kInvalidArgument,
          "label out of range: " + std::to_string(label));
  bits_.set(static_cast<std::size_t>(label));
  return *this;
}

std::vector<int> LabelSelector::labels() const {
  std::vector<int> out;
  for (int l = 0; l < 256; ++l) {
    if (bits_[static_cast<std::size_t>(l)]) out.push_back(l);
  }
  return out;
}

void WindowSpec::validate() const {
  require(std::isfinite(hu_min) && std::isfinite(hu_max) && hu_min < hu_max,
          ErrorCode::kInvalidArgument,
          "window requires finite hu_min < hu_max");
}

void SliceSample::validate() const {
  require(channels >= 1 && channels % 2 == 1, ErrorCode::kInvalidArgument,
          "slice stack depth must be odd");
  require(image.size() == static_cast<std::size_t>(channels) * plane_size(),
          ErrorCode::kShapeMismatch, "image buffer does not match shape");
  require(mask.empty() || mask.size() == plane_size(),
          ErrorCode::kShapeMismatch, "mask buffer does not match shape");
}

float window_value(double hu, const WindowSpec& window) {
  const double t = (hu - window.hu_min) / (window.hu_max - window.hu_min);
  return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

WindowedVolume window_hu(const CTVolume& volume, const WindowSpec& window) {
  window.validate();
  WindowedVolume out;
  out.shape = volume.shape;
  out.identifier = volume.identifier;
  out.values.resize(volume.voxels.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(volume.voxels.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.values[static_cast<std::size_t>(i)] =
        window_value(volume.voxels[static_cast<std::size_t>(i)], window);
  }
  return out;
}

namespace {

void check_stack_depth(int k) {
  require(k >= 1 && k % 2 == 1, ErrorCode::kInvalidArgument,
          "slice stack depth k must be odd and >= 1, got " + std::to_string(k));
}

void fill_stack(const WindowedVolume& volume, int slice_index, int k,
                SliceSample& s) {
  const Shape3& sh = volume.shape;
  require(slice_index >= 0 && slice_index < sh.depth,
          ErrorCode::kInvalidArgument, "slice index out of range");
  s.channels = k;
  s.height = sh.height;
  s.width = sh.width;
  s.volume_id = volume.identifier;
  s.slice_index = slice_index;
  const std::size_t plane = sh.plane_size();
  s.image.resize(static_cast<std::size_t>(k) * plane);
  const int half = (k - 1) / 2;
  for (int c = 0; c < k; ++c) {
    const int z = std::clamp(slice_index - half + c, 0, sh.depth - 1);
    std::copy_n(volume.values.begin() + static_cast<std::ptrdiff_t>(z * plane),
                plane, s.image.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
}

}  // namespace

SliceSample extract_image_stack(const WindowedVolume& volume, int slice_index,
                                int k) {
  check_stack_depth(k);
  SliceSample s;
  fill_stack(volume, slice_index, k, s);
  return s;
}

SliceSample extract_slice(const WindowedVolume& volume, const MaskVolume& mask,
                          const LabelSelector& target, int slice_index, int k) {
  check_stack_depth(k);
  require(mask.shape == volume.shape, ErrorCode::kShapeMismatch,
          "mask shape " + to_string(mask.shape) + " does not match volume " +
              to_string(volume.shape));
  SliceSample s;
  fill_stack(volume, slice_index, k, s);
  const std::size_t plane = volume.shape.plane_size();
  s.mask.resize(plane);
  const auto* src = mask.labels.data() + slice_index * plane;
  for (std::size_t i = 0; i < plane; ++i) {
    s.mask[i] = target.contains(src[i]) ? 1 : 0;
  }
  return s;
}

std::vector<SliceSample> extract_slices(const WindowedVolume& volume,
                                        const MaskVolume& mask,
                                        const LabelSelector& target, int k) {
  check_stack_depth(k);
  for (int l : target.labels()) {
    require(mask.semantics.contains(l), ErrorCode::kInvalidArgument,
            "unknown target label " + std::to_string(l));
  }
  require(!target.labels().empty(), ErrorCode::kInvalidArgument,
          "empty target label set");
  std::vector<SliceSample> out;
  out.reserve(static_cast<std::size_t>(volume.shape.depth));
  for (int z = 0; z < volume.shape.depth; ++z) {
    out.push_back(extract_slice(volume, mask, target, z, k));
  }
  return out;
}

std::vector<SliceSample> extract_slices(const WindowedVolume& volume,
                                        const MaskVolume& mask,
                                        int target_label, int k) {
  require(target_label >= 0 && target_label < 256 &&
              mask.semantics.contains(target_label),
          ErrorCode::kInvalidArgument,
          "unknown target label " + std::to_string(target_label));
  return extract_slices(volume, mask, LabelSelector::single(target_label), k);
}

std::vector<float> axial_plane(const WindowedVolume& volume, int slice_index) {
  const std::size_t plane = volume.shape.plane_size();
  auto first = volume.values.begin() +
               static_cast<std::ptrdiff_t>(slice_index * plane);
  return {first, first + static_cast<std::ptrdiff_t>(plane)};
}

std::vector<float> resize_bilinear(const std::vector<float>& plane, int height,
                                   int width, int out_height, int out_width) {
  if (height == out_height && width == out_width) return plane;
  std::vector<float> out(static_cast<std::size_t>(out_height) * out_width);
  const double sy = static_cast<double>(height) / out_height;
  const double sx = static_cast<double>(width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      auto at = [&](int r, int c) {
        return static_cast<double>(plane[static_cast<std::size_t>(r) * width + c]);
      };
      const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
                       wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
      out[static_cast<std::size_t>(y) * out_width + x] = static_cast<float>(v);
    }
  }
  return out;
}

std::vector<std::uint8_t> resize_nearest(const std::vector<std::uint8_t>& plane,
                                         int height, int width, int out_height,
                                         int out_width) {
  if (height == out_height && width == out_width) return plane;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_height) *
                                out_width);
  for (int y = 0; y < out_height; ++y) {
    const int sy = std::min(
        height - 1, static_cast<int>((y + 0.5) * height / out_height));
    for (int x = 0; x < out_width; ++x) {
      const int sx =
          std::min(width - 1, static_cast<int>((x + 0.5) * width / out_width));
      out[static_cast<std::size_t>(y) * out_width + x] =
          plane[static_cast<std::size_t>(sy) * width + sx];
    }
  }
  return out;
}

SliceSample resize_sample(const SliceSample& sample, int out_height,
                          int out_width) {
  if (sample.height == out_height && sample.width == out_width) return sample;
  SliceSample out = sample;
  out.height = out_height;
  out.width = out_width;
  const std::size_t plane = sample.plane_size();
  out.image.clear();
  out.image.reserve(static_cast<std::size_t>(sample.channels) * out_height *
                    out_width);
  for (int c = 0; c < sample.channels; ++c) {
    std::vector<float> ch(
        sample.image.begin() + static_cast<std::ptrdiff_t>(c * plane),
        sample.image.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
    auto r = resize_bilinear(ch, sample.height, sample.width, out_height,
                             out_width);
    out.image.insert(out.image.end(), r.begin(), r.end());
  }
  if (!sample.mask.empty()) {
    out.mask = resize_nearest(sample.mask, sample.height, sample.width,
                              out_height, out_width);
  }
  return out;
}

}  // namespace tumorseg
