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

#include "tumorseg/augment.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "tumorseg/error.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

void AugmentConfig::validate() const {
  require(elastic_alpha >= 0, ErrorCode::kConfig, "augment.elastic_alpha must be >= 0");
  require(elastic_sigma > 0, ErrorCode::kConfig, "augment.elastic_sigma must be > 0");
  require(max_shift >= 0 && max_shift <= 0.5, ErrorCode::kConfig,
          "augment.max_shift must lie in [0, 0.5]");
  require(scale_range[0] > 0 && scale_range[0] <= 1.0 && scale_range[1] >= 1.0,
          ErrorCode::kConfig, "augment.scale_range must satisfy 0 < lo <= 1 <= hi");
  require(max_rotate_deg >= 0 && max_rotate_deg <= 45, ErrorCode::kConfig,
          "augment.max_rotate_deg must lie in [0, 45]");
  require(probability >= 0 && probability <= 1, ErrorCode::kConfig,
          "augment.probability must lie in [0, 1]");
}

namespace {

/// Source coordinate (row, col) for every output pixel.
struct SamplingMap {
  int height = 0;
  int width = 0;
  std::vector<double> rows;
  std::vector<double> cols;
};

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

void smooth(std::vector<double>& field, int h, int w, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(field.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += k[static_cast<std::size_t>(i + r)] *
               field[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += k[static_cast<std::size_t>(i + r)] *
               tmp[static_cast<std::size_t>(yy) * w + x];
      }
      field[static_cast<std::size_t>(y) * w + x] = acc;
    }
}

SamplingMap elastic_map(int h, int w, const ElasticParams& p) {
  require(p.sigma > 0, ErrorCode::kInvalidArgument,
          "elastic sigma must be positive");
  require(p.alpha >= 0, ErrorCode::kInvalidArgument,
          "elastic alpha must be non-negative");
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> dy(n), dx(n);
  std::mt19937_64 gen(p.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) dy[i] = u(gen);
  for (std::size_t i = 0; i < n; ++i) dx[i] = u(gen);
  smooth(dy, h, w, p.sigma);
  smooth(dx, h, w, p.sigma);
  SamplingMap m{h, w, std::vector<double>(n), std::vector<double>(n)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      m.rows[i] = y + p.alpha * dy[i];
      m.cols[i] = x + p.alpha * dx[i];
    }
  return m;
}

SamplingMap affine_map(int h, int w, const AffineParams& p) {
  require(std::fabs(p.shift[0]) <= 0.5 && std::fabs(p.shift[1]) <= 0.5,
          ErrorCode::kInvalidArgument, "affine shift must satisfy |shift| <= 0.5");
  require(p.scale > 0, ErrorCode::kInvalidArgument, "affine scale must be > 0");
  const double cy = (h - 1) / 2.0;
  const double cx = (w - 1) / 2.0;
  const double ty = p.shift[0] * h;
  const double tx = p.shift[1] * w;
  const double theta = p.rotate_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  SamplingMap m{h, w, std::vector<double>(n), std::vector<double>(n)};
  // Forward map: out = R(theta) * scale * (src - center) + center + shift.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double qy = (y - cy - ty) / p.scale;
      const double qx = (x - cx - tx) / p.scale;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      m.rows[i] = cy + c * qy + s * qx;
      m.cols[i] = cx - s * qy + c * qx;
    }
  return m;
}

float sample_bilinear(const float* plane, int h, int w, double fy, double fx) {
  const double y0f = std::floor(fy);
  const double x0f = std::floor(fx);
  const int y0 = static_cast<int>(y0f);
  const int x0 = static_cast<int>(x0f);
  const double wy = fy - y0f;
  const double wx = fx - x0f;
  auto at = [&](int y, int x) -> double {
    if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
    return plane[static_cast<std::size_t>(y) * w + x];
  };
  const double top = wx == 0.0 ? at(y0, x0) : (1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1);
  if (wy == 0.0) return static_cast<float>(top);
  const double bottom =
      wx == 0.0 ? at(y0 + 1, x0) : (1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1);
  return static_cast<float>((1 - wy) * top + wy * bottom);
}

std::uint8_t sample_nearest(const std::uint8_t* plane, int h, int w, double fy,
                            double fx) {
  const double ry = std::floor(fy + 0.5);
  const double rx = std::floor(fx + 0.5);
  if (ry < 0 || rx < 0 || ry >= h || rx >= w) return 0;
  return plane[static_cast<std::size_t>(ry) * w + static_cast<std::size_t>(rx)];
}

std::vector<std::uint8_t> warp_mask(const std::vector<std::uint8_t>& mask,
                                    const SamplingMap& m) {
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sample_nearest(mask.data(), m.height, m.width, m.rows[i], m.cols[i]);
  }
  return out;
}

SliceSample warp(const SliceSample& in, const SamplingMap& m) {
  SliceSample out = in;
  const std::size_t plane = in.plane_size();
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.image.data() + c * plane;
    float* dst = out.image.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = sample_bilinear(src, in.height, in.width, m.rows[i], m.cols[i]);
    }
  }
  if (!in.mask.empty()) out.mask = warp_mask(in.mask, m);
  return out;
}

}  // namespace

SliceSample elastic_transform(const SliceSample& sample, double alpha,
                              double sigma, std::uint64_t seed) {
  require(sigma > 0, ErrorCode::kInvalidArgument,
          "elastic sigma must be positive");
  return warp(sample, elastic_map(sample.height, sample.width, {alpha, sigma, seed}));
}

SliceSample affine_transform(const SliceSample& sample,
                             const AffineParams& params) {
  return warp(sample, affine_map(sample.height, sample.width, params));
}

AugmentResult apply_pipeline(const SliceSample& sample,
                             const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 gen(derive_seed(seed, sample.volume_id,
                                  static_cast<std::uint64_t>(sample.slice_index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Every draw happens unconditionally so the stream layout never depends
  // on which transforms fire.
  const bool do_elastic = unit(gen) < cfg.probability;
  const bool do_shift = unit(gen) < cfg.probability;
  const bool do_scale = unit(gen) < cfg.probability;
  const bool do_rotate = unit(gen) < cfg.probability;
  const double shift_r = (2 * unit(gen) - 1) * cfg.max_shift;
  const double shift_c = (2 * unit(gen) - 1) * cfg.max_shift;
  const double scale =
      cfg.scale_range[0] + (cfg.scale_range[1] - cfg.scale_range[0]) * unit(gen);
  const double rotate = (2 * unit(gen) - 1) * cfg.max_rotate_deg;
  const std::uint64_t elastic_seed = gen();

  AugmentResult result{sample, {}};
  if (do_elastic) {
    result.record.elastic = ElasticParams{cfg.elastic_alpha, cfg.elastic_sigma,
                                          elastic_seed};
    result.sample = elastic_transform(result.sample, cfg.elastic_alpha,
                                      cfg.elastic_sigma, elastic_seed);
  }
  if (do_shift || do_scale || do_rotate) {
    AffineParams a;
    if (do_shift) a.shift = {shift_r, shift_c};
    if (do_scale) a.scale = scale;
    if (do_rotate) a.rotate_deg = rotate;
    result.record.affine = a;
    result.sample = affine_transform(result.sample, a);
  }
  return result;
}

std::vector<std::uint8_t> replay_on_mask(const std::vector<std::uint8_t>& mask,
                                         int height, int width,
                                         const AugmentRecord& record) {
  require(mask.size() == static_cast<std::size_t>(height) * width,
          ErrorCode::kShapeMismatch, "mask buffer does not match shape");
  std::vector<std::uint8_t> out = mask;
  if (record.elastic) out = warp_mask(out, elastic_map(height, width, *record.elastic));
  if (record.affine) out = warp_mask(out, affine_map(height, width, *record.affine));
  return out;
}

}  // namespace tumorseg
