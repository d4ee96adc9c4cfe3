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

#include <cstddef>
#include <span>
#include <vector>

namespace tumorseg {

/// Dense activation tensor stored channel-major, [channel][batch][row][col].
/// Keeping the batch inside each channel makes a convolution over the whole
/// batch a single GEMM and makes per-channel reductions contiguous.
template <typename T>
struct BasicTensor {
  int c = 0;
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<T> data;

  BasicTensor() = default;
  BasicTensor(int channels, int batch, int height, int width, T fill = T{})
      : c(channels), n(batch), h(height), w(width),
        data(static_cast<std::size_t>(channels) * batch * height * width, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t channel_stride() const { return static_cast<std::size_t>(n) * plane(); }

  T* channel(int ci) { return data.data() + ci * channel_stride(); }
  const T* channel(int ci) const { return data.data() + ci * channel_stride(); }

  T& at(int ci, int ni, int y, int x) {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
  const T& at(int ci, int ni, int y, int x) const {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }

  bool same_shape(const BasicTensor& o) const {
    return c == o.c && n == o.n && h == o.h && w == o.w;
  }
  void reshape(int channels, int batch, int height, int width) {
    c = channels; n = batch; h = height; w = width;
    data.assign(static_cast<std::size_t>(channels) * batch * height * width, T{});
  }
};

using Tensor = BasicTensor<float>;

/// Packs a batch given as [batch][channel][row][col].
Tensor from_nchw(std::span<const float> values, int batch, int channels,
                 int height, int width);

/// Unpacks to [batch][channel][row][col].
std::vector<float> to_nchw(const Tensor& t);

/// Returns sample `index` of the batch as a batch of one.
Tensor batch_slice(const Tensor& t, int index);

}  // namespace tumorseg
