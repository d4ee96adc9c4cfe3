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

#include "tumorseg/inference.hpp"

#include "tumorseg/error.hpp"

namespace tumorseg {

namespace {

/// Runs the network over all slices; `emit(z, probs, h, w)` receives each
/// slice's output plane at network resolution, in depth order.
template <typename Emit>
void run_slices(const SegNetwork& net, const CTVolume& volume, const WindowSpec& window,
                int k, const PredictOptions& opts, Emit emit) {
  require(volume.shape.voxel_count() > 0, ErrorCode::kInvalidArgument, "empty volume");
  require(k == net.config().in_channels, ErrorCode::kShapeMismatch,
          "k=" + std::to_string(k) + " does not match network in_channels=" +
              std::to_string(net.config().in_channels));
  require(opts.batch_size > 0, ErrorCode::kInvalidArgument, "batch_size must be > 0");
  const int h = opts.height > 0 ? opts.height : volume.shape.height;
  const int w = opts.width > 0 ? opts.width : volume.shape.width;
  require(h % 32 == 0 && w % 32 == 0, ErrorCode::kShapeMismatch,
          "network input size must be divisible by 32");
  const WindowedVolume wv = window_hu(volume, window);
  const int depth = volume.shape.depth;
  for (int z0 = 0; z0 < depth; z0 += opts.batch_size) {
    const int n = std::min(opts.batch_size, depth - z0);
    Tensor x(k, n, h, w);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
      SliceSample s = extract_image_stack(wv, z0 + i, k);
      if (s.height != h || s.width != w) s = resize_sample(s, h, w);
      for (int c = 0; c < k; ++c) {
        std::copy_n(s.image.data() + static_cast<std::size_t>(c) * plane, plane,
                    x.data.data() + (static_cast<std::size_t>(c) * n + i) * plane);
      }
    }
    const Tensor p = net.predict(x);
    for (int i = 0; i < n; ++i) emit(z0 + i, p.data.data() + static_cast<std::size_t>(i) * plane, h, w);
  }
}

}  // namespace

std::vector<float> predict_probabilities(const SegNetwork& net, const CTVolume& volume,
                                         const WindowSpec& window, int k,
                                         const PredictOptions& opts) {
  const Shape3& s = volume.shape;
  std::vector<float> out(s.voxel_count());
  run_slices(net, volume, window, k, opts, [&](int z, const float* p, int h, int w) {
    std::vector<float> plane(p, p + static_cast<std::size_t>(h) * w);
    plane = resize_bilinear(plane, h, w, s.height, s.width);
    std::copy(plane.begin(), plane.end(), out.begin() + static_cast<std::ptrdiff_t>(s.plane_size() * z));
  });
  return out;
}

MaskVolume predict_volume(const SegNetwork& net, const CTVolume& volume,
                          const WindowSpec& window, int k, const PredictOptions& opts) {
  require(opts.threshold > 0 && opts.threshold < 1, ErrorCode::kInvalidArgument,
          "threshold must lie in (0, 1)");
  const Shape3& s = volume.shape;
  MaskVolume m;
  m.shape = s;
  m.spacing = volume.spacing;
  m.identifier = volume.identifier;
  m.source_header = volume.source_header;
  m.semantics = {{0, "background"}, {1, "foreground"}};
  m.labels.assign(s.voxel_count(), 0);
  const auto thr = static_cast<float>(opts.threshold);
  run_slices(net, volume, window, k, opts, [&](int z, const float* p, int h, int w) {
    std::vector<std::uint8_t> plane(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = p[i] > thr ? 1 : 0;
    plane = resize_nearest(plane, h, w, s.height, s.width);
    std::copy(plane.begin(), plane.end(), m.labels.begin() + static_cast<std::ptrdiff_t>(s.plane_size() * z));
  });
  return m;
}

MaskVolume predict_volume(const LoadedModel& model, const CTVolume& volume,
                          double threshold, int batch_size) {
  PredictOptions o;
  o.threshold = threshold;
  o.batch_size = batch_size;
  o.height = model.meta.height;
  o.width = model.meta.width;
  return predict_volume(model.net, volume, model.meta.window, model.meta.input_k, o);
}

MaskVolume combine_organ_tumor(const MaskVolume& organ, const MaskVolume& tumor) {
  require(organ.shape == tumor.shape, ErrorCode::kShapeMismatch,
          "shape mismatch: organ " + to_string(organ.shape) + " vs tumor " +
              to_string(tumor.shape));
  MaskVolume out = organ;
  out.semantics = default_label_semantics();
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const bool o = organ.labels[i] != 0;
    const bool t = tumor.labels[i] != 0;
    out.labels[i] = o ? (t ? 2 : 1) : 0;
  }
  return out;
}

}  // namespace tumorseg
