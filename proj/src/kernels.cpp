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

#include "tumorseg/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "tumorseg/error.hpp"

namespace tumorseg::kernels {
namespace {
constexpr float kMinProbability = std::numeric_limits<float>::min();
constexpr float kMaxProbability = 1.0f - std::numeric_limits<float>::epsilon() / 2;
}  // namespace

namespace {

/// Output columns [lo, hi) whose input column ox*stride - padding + kx is in
/// [0, in_w).
inline void valid_range(int in_w, int out_w, int stride, int padding, int kx,
                        int& lo, int& hi) {
  const int off = kx - padding;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  hi = (in_w - 1 - off) < 0 ? 0 : (in_w - 1 - off) / stride + 1;
  hi = std::min(hi, out_w);
  lo = std::min(lo, hi);
}

/// Per-thread scratch that keeps its allocation between calls.
std::vector<float>& scratch(std::size_t size) {
  thread_local std::vector<float> buf;
  if (buf.size() < size) buf.resize(size);
  return buf;
}

}  // namespace

void im2col(const Tensor& x, int kernel, int stride, int padding, int out_h,
            int out_w, std::vector<float>& col) {
  const std::size_t rows = static_cast<std::size_t>(x.c) * kernel * kernel;
  const std::size_t cols = static_cast<std::size_t>(x.n) * out_h * out_w;
  if (col.size() < rows * cols) col.resize(rows * cols);
  im2col(x, kernel, stride, padding, out_h, out_w, col.data());
}

void im2col(const Tensor& x, int kernel, int stride, int padding, int out_h,
            int out_w, float* col) {
  const int rows = x.c * kernel * kernel;
  const std::size_t cols = static_cast<std::size_t>(x.n) * out_h * out_w;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int ci = r / (kernel * kernel);
    const int ky = (r / kernel) % kernel;
    const int kx = r % kernel;
    int lo, hi;
    valid_range(x.w, out_w, stride, padding, kx, lo, hi);
    const int off = kx - padding;
    float* dst = col + static_cast<std::size_t>(r) * cols;
    for (int ni = 0; ni < x.n; ++ni) {
      const float* src = &x.data[(static_cast<std::size_t>(ci) * x.n + ni) * x.plane()];
      for (int oy = 0; oy < out_h; ++oy) {
        const int iy = oy * stride - padding + ky;
        if (iy < 0 || iy >= x.h) {
          std::fill_n(dst, out_w, 0.0f);
          dst += out_w;
          continue;
        }
        const float* row = src + static_cast<std::size_t>(iy) * x.w + off;
        std::fill_n(dst, lo, 0.0f);
        if (stride == 1) {
          std::copy(row + lo, row + hi, dst + lo);
        } else {
          for (int ox = lo; ox < hi; ++ox) dst[ox] = row[ox * stride];
        }
        std::fill(dst + hi, dst + out_w, 0.0f);
        dst += out_w;
      }
    }
  }
}

void col2im(const std::vector<float>& col, int kernel, int stride, int padding,
            int out_h, int out_w, Tensor& x) {
  col2im(col.data(), kernel, stride, padding, out_h, out_w, x);
}

void col2im(const float* col, int kernel, int stride, int padding, int out_h,
            int out_w, Tensor& x) {
  const std::size_t cols = static_cast<std::size_t>(x.n) * out_h * out_w;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        const int r = (ci * kernel + ky) * kernel + kx;
        int lo, hi;
        valid_range(x.w, out_w, stride, padding, kx, lo, hi);
        const int off = kx - padding;
        const float* src = col + static_cast<std::size_t>(r) * cols;
        for (int ni = 0; ni < x.n; ++ni) {
          float* dst = &x.data[(static_cast<std::size_t>(ci) * x.n + ni) * x.plane()];
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - padding + ky;
            if (iy >= 0 && iy < x.h) {
              float* row = dst + static_cast<std::size_t>(iy) * x.w + off;
              if (stride == 1) {
                for (int ox = lo; ox < hi; ++ox) row[ox] += src[ox];
              } else {
                for (int ox = lo; ox < hi; ++ox) row[ox * stride] += src[ox];
              }
            }
            src += out_w;
          }
        }
      }
  }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(i) * ldc + j] *= beta;
    return;
  }
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

namespace {

void add_bias(Tensor& y, std::span<const float> bias) {
  if (bias.empty()) return;
  const std::size_t stride = y.channel_stride();
#pragma omp parallel for schedule(static)
  for (int co = 0; co < y.c; ++co) {
    float* p = y.channel(co);
    const float b = bias[static_cast<std::size_t>(co)];
    for (std::size_t i = 0; i < stride; ++i) p[i] += b;
  }
}

void accumulate_bias_grad(const Tensor& dy, std::span<float> dbias) {
  if (dbias.empty()) return;
  const std::size_t stride = dy.channel_stride();
#pragma omp parallel for schedule(static)
  for (int co = 0; co < dy.c; ++co) {
    const float* p = dy.channel(co);
    double acc = 0;
    for (std::size_t i = 0; i < stride; ++i) acc += p[i];
    dbias[static_cast<std::size_t>(co)] += static_cast<float>(acc);
  }
}

bool is_pointwise(const ConvSpec& s) {
  return s.kernel == 1 && s.stride == 1 && s.padding == 0;
}

}  // namespace

void conv2d_forward(const Tensor& x, std::span<const float> weight,
                    std::span<const float> bias, const ConvSpec& spec,
                    Tensor& y) {
  require(x.c == spec.in_channels, ErrorCode::kShapeMismatch,
          "conv input channels do not match weights");
  const int oh = conv_out_size(x.h, spec.kernel, spec.stride, spec.padding);
  const int ow = conv_out_size(x.w, spec.kernel, spec.stride, spec.padding);
  require(oh >= 1 && ow >= 1, ErrorCode::kShapeMismatch,
          "conv input smaller than kernel");
  y.reshape(spec.out_channels, x.n, oh, ow);
  const int kdim = spec.in_channels * spec.kernel * spec.kernel;
  const int m = x.n * oh * ow;
  if (is_pointwise(spec)) {
    gemm(false, false, spec.out_channels, m, kdim, 1.0f, weight.data(), kdim,
         x.data.data(), m, 0.0f, y.data.data(), m);
  } else {
    float* col = scratch(static_cast<std::size_t>(kdim) * m).data();
    im2col(x, spec.kernel, spec.stride, spec.padding, oh, ow, col);
    gemm(false, false, spec.out_channels, m, kdim, 1.0f, weight.data(), kdim,
         col, m, 0.0f, y.data.data(), m);
  }
  add_bias(y, bias);
}

void conv2d_backward(const Tensor& x, std::span<const float> weight,
                     const Tensor& dy, const ConvSpec& spec, Tensor* dx,
                     std::span<float> dweight, std::span<float> dbias) {
  const int oh = dy.h;
  const int ow = dy.w;
  const int kdim = spec.in_channels * spec.kernel * spec.kernel;
  const int m = x.n * oh * ow;
  accumulate_bias_grad(dy, dbias);
  if (is_pointwise(spec)) {
    gemm(false, true, spec.out_channels, kdim, m, 1.0f, dy.data.data(), m,
         x.data.data(), m, 1.0f, dweight.data(), kdim);
    if (dx) {
      dx->reshape(x.c, x.n, x.h, x.w);
      gemm(true, false, kdim, m, spec.out_channels, 1.0f, weight.data(), kdim,
           dy.data.data(), m, 0.0f, dx->data.data(), m);
    }
    return;
  }
  float* col = scratch(static_cast<std::size_t>(kdim) * m).data();
  im2col(x, spec.kernel, spec.stride, spec.padding, oh, ow, col);
  gemm(false, true, spec.out_channels, kdim, m, 1.0f, dy.data.data(), m,
       col, m, 1.0f, dweight.data(), kdim);
  if (dx) {
    gemm(true, false, kdim, m, spec.out_channels, 1.0f, weight.data(), kdim,
         dy.data.data(), m, 0.0f, col, m);
    dx->reshape(x.c, x.n, x.h, x.w);
    col2im(col, spec.kernel, spec.stride, spec.padding, oh, ow, *dx);
  }
}

void conv_transpose2d_forward(const Tensor& x, std::span<const float> weight,
                              std::span<const float> bias, const ConvSpec& spec,
                              Tensor& y) {
  require(x.c == spec.in_channels, ErrorCode::kShapeMismatch,
          "transposed conv input channels do not match weights");
  const int oh = conv_transpose_out_size(x.h, spec.kernel, spec.stride,
                                         spec.padding, spec.output_padding);
  const int ow = conv_transpose_out_size(x.w, spec.kernel, spec.stride,
                                         spec.padding, spec.output_padding);
  const int rows = spec.out_channels * spec.kernel * spec.kernel;
  const int m = x.n * x.h * x.w;
  float* col = scratch(static_cast<std::size_t>(rows) * m).data();
  gemm(true, false, rows, m, spec.in_channels, 1.0f, weight.data(), rows,
       x.data.data(), m, 0.0f, col, m);
  y.reshape(spec.out_channels, x.n, oh, ow);
  col2im(col, spec.kernel, spec.stride, spec.padding, x.h, x.w, y);
  add_bias(y, bias);
}

void conv_transpose2d_backward(const Tensor& x, std::span<const float> weight,
                               const Tensor& dy, const ConvSpec& spec,
                               Tensor* dx, std::span<float> dweight,
                               std::span<float> dbias) {
  const int rows = spec.out_channels * spec.kernel * spec.kernel;
  const int m = x.n * x.h * x.w;
  accumulate_bias_grad(dy, dbias);
  float* col = scratch(static_cast<std::size_t>(rows) * m).data();
  im2col(dy, spec.kernel, spec.stride, spec.padding, x.h, x.w, col);
  gemm(false, true, spec.in_channels, rows, m, 1.0f, x.data.data(), m,
       col, m, 1.0f, dweight.data(), rows);
  if (dx) {
    dx->reshape(x.c, x.n, x.h, x.w);
    gemm(false, false, spec.in_channels, m, rows, 1.0f, weight.data(), rows,
         col, m, 0.0f, dx->data.data(), m);
  }
}

void maxpool2d_forward(const Tensor& x, int kernel, int stride, int padding,
                       Tensor& y, std::vector<std::int32_t>& argmax) {
  const int oh = conv_out_size(x.h, kernel, stride, padding);
  const int ow = conv_out_size(x.w, kernel, stride, padding);
  y.reshape(x.c, x.n, oh, ow);
  argmax.resize(y.size());
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ni = 0; ni < x.n; ++ni) {
      const std::size_t base = (static_cast<std::size_t>(ci) * x.n + ni) * x.plane();
      const std::size_t obase = (static_cast<std::size_t>(ci) * y.n + ni) * y.plane();
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          float best = -std::numeric_limits<float>::infinity();
          std::int32_t where = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= x.w) continue;
              const std::size_t idx = base + static_cast<std::size_t>(iy) * x.w + ix;
              if (x.data[idx] > best || where < 0) {
                best = x.data[idx];
                where = static_cast<std::int32_t>(idx);
              }
            }
          }
          const std::size_t o = obase + static_cast<std::size_t>(oy) * ow + ox;
          y.data[o] = best;
          argmax[o] = where;
        }
    }
  }
}

void maxpool2d_backward(const Tensor& dy, const std::vector<std::int32_t>& argmax,
                        Tensor& dx) {
  std::fill(dx.data.begin(), dx.data.end(), 0.0f);
  const std::size_t stride = dy.channel_stride();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < dy.c; ++ci) {
    const std::size_t base = static_cast<std::size_t>(ci) * stride;
    for (std::size_t i = 0; i < stride; ++i) {
      dx.data[static_cast<std::size_t>(argmax[base + i])] += dy.data[base + i];
    }
  }
}

void batchnorm_train_forward(const Tensor& x, std::span<const float> gamma,
                             std::span<const float> beta, float eps, Tensor& y,
                             Tensor& xhat, std::vector<float>& mean,
                             std::vector<float>& var, std::vector<float>& invstd) {
  y.reshape(x.c, x.n, x.h, x.w);
  xhat.reshape(x.c, x.n, x.h, x.w);
  mean.resize(static_cast<std::size_t>(x.c));
  var.resize(static_cast<std::size_t>(x.c));
  invstd.resize(static_cast<std::size_t>(x.c));
  const std::size_t count = x.channel_stride();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < x.c; ++ci) {
    const float* p = x.channel(ci);
    double s = 0;
    for (std::size_t i = 0; i < count; ++i) s += p[i];
    const double mu = s / static_cast<double>(count);
    double ss = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double d = p[i] - mu;
      ss += d * d;
    }
    const double v = ss / static_cast<double>(count);
    const double is = 1.0 / std::sqrt(v + eps);
    const auto c = static_cast<std::size_t>(ci);
    mean[c] = static_cast<float>(mu);
    var[c] = static_cast<float>(v);
    invstd[c] = static_cast<float>(is);
    float* xh = xhat.channel(ci);
    float* out = y.channel(ci);
    const float g = gamma[c];
    const float b = beta[c];
    for (std::size_t i = 0; i < count; ++i) {
      xh[i] = static_cast<float>((p[i] - mu) * is);
      out[i] = g * xh[i] + b;
    }
  }
}

void batchnorm_backward(const Tensor& dy, const Tensor& xhat,
                        std::span<const float> gamma,
                        const std::vector<float>& invstd, Tensor& dx,
                        std::span<float> dgamma, std::span<float> dbeta) {
  dx.reshape(dy.c, dy.n, dy.h, dy.w);
  const std::size_t count = dy.channel_stride();
  const double inv_count = 1.0 / static_cast<double>(count);
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < dy.c; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const float* g = dy.channel(ci);
    const float* xh = xhat.channel(ci);
    double sum_dy = 0;
    double sum_dy_xh = 0;
    for (std::size_t i = 0; i < count; ++i) {
      sum_dy += g[i];
      sum_dy_xh += static_cast<double>(g[i]) * xh[i];
    }
    dgamma[c] += static_cast<float>(sum_dy_xh);
    dbeta[c] += static_cast<float>(sum_dy);
    const double scale = static_cast<double>(gamma[c]) * invstd[c];
    const double mean_dy = sum_dy * inv_count;
    const double mean_dy_xh = sum_dy_xh * inv_count;
    float* out = dx.channel(ci);
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = static_cast<float>(scale * (g[i] - mean_dy - xh[i] * mean_dy_xh));
    }
  }
}

void batchnorm_eval_forward(const Tensor& x, std::span<const float> gamma,
                            std::span<const float> beta,
                            std::span<const float> running_mean,
                            std::span<const float> running_var, float eps,
                            Tensor& y) {
  y.reshape(x.c, x.n, x.h, x.w);
  const std::size_t count = x.channel_stride();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < x.c; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const float is = 1.0f / std::sqrt(running_var[c] + eps);
    const float scale = gamma[c] * is;
    const float shift = beta[c] - running_mean[c] * scale;
    const float* p = x.channel(ci);
    float* out = y.channel(ci);
    for (std::size_t i = 0; i < count; ++i) out[i] = p[i] * scale + shift;
  }
}

void relu_inplace(Tensor& x) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  float* p = x.data.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = p[i] > 0.0f ? p[i] : 0.0f;
}

void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dy.size());
  const float* out = y.data.data();
  float* g = dy.data.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) g[i] = out[i] > 0.0f ? g[i] : 0.0f;
}

void add_inplace(Tensor& acc, const Tensor& x) {
  require(acc.same_shape(x), ErrorCode::kShapeMismatch,
          "tensor shapes differ in residual addition");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(acc.size());
  float* a = acc.data.data();
  const float* b = x.data.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) a[i] += b[i];
}

void sigmoid_inplace(Tensor& x) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  float* p = x.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const float v = p[i];
    const float s = v >= 0 ? 1.0f / (1.0f + std::exp(-v))
                           : std::exp(v) / (1.0f + std::exp(v));
    // Saturation would otherwise return exactly 0 or 1.
    p[i] = std::clamp(s, kMinProbability, kMaxProbability);
  }
}

}  // namespace tumorseg::kernels
