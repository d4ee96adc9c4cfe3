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

#include "tumorseg/tensor.hpp"

#include <algorithm>

#include "tumorseg/error.hpp"

namespace tumorseg {

Tensor from_nchw(std::span<const float> values, int batch, int channels,
                 int height, int width) {
  Tensor t(channels, batch, height, width);
  require(values.size() == t.size(), ErrorCode::kShapeMismatch,
          "batch buffer does not match (B, C, H, W)");
  const std::size_t plane = t.plane();
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c) {
      const float* src = values.data() + (static_cast<std::size_t>(b) * channels + c) * plane;
      std::copy_n(src, plane, &t.at(c, b, 0, 0));
    }
  return t;
}

std::vector<float> to_nchw(const Tensor& t) {
  std::vector<float> out(t.size());
  const std::size_t plane = t.plane();
  for (int b = 0; b < t.n; ++b)
    for (int c = 0; c < t.c; ++c) {
      std::copy_n(&t.at(c, b, 0, 0), plane,
                  out.data() + (static_cast<std::size_t>(b) * t.c + c) * plane);
    }
  return out;
}

Tensor batch_slice(const Tensor& t, int index) {
  require(index >= 0 && index < t.n, ErrorCode::kInvalidArgument,
          "batch index out of range");
  Tensor out(t.c, 1, t.h, t.w);
  for (int c = 0; c < t.c; ++c) {
    std::copy_n(&t.at(c, index, 0, 0), t.plane(), out.channel(c));
  }
  return out;
}

}  // namespace tumorseg
