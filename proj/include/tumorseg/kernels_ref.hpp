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

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tumorseg/kernels.hpp"
#include "tumorseg/tensor.hpp"

/// Serial direct-loop versions of the network kernels. They share the
/// channel-major layout and weight layouts of tumorseg::kernels, are
/// templated on the scalar so finite-difference checks can run in double,
/// and exist only to validate and benchmark the optimized path.
namespace tumorseg::reference {

template <typename T>
void conv2d_forward(const BasicTensor<T>& x, std::span<const T> weight,
                    std::span<const T> bias, const ConvSpec& s,
                    BasicTensor<T>& y) {
  const int oh = conv_out_size(x.h, s.kernel, s.stride, s.padding);
  const int ow = conv_out_size(x.w, s.kernel, s.stride, s.padding);
  y.reshape(s.out_channels, x.n, oh, ow);
  for (int co = 0; co < s.out_channels; ++co)
    for (int ni = 0; ni < x.n; ++ni)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = bias.empty() ? T{} : bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int iy = oy * s.stride - s.padding + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int ix = ox * s.stride - s.padding + kx;
                if (ix < 0 || ix >= x.w) continue;
                const std::size_t wi =
                    ((static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel + ky) *
                        s.kernel + kx;
                acc += weight[wi] * x.at(ci, ni, iy, ix);
              }
            }
          y.at(co, ni, oy, ox) = acc;
        }
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& x, std::span<const T> weight,
                     const BasicTensor<T>& dy, const ConvSpec& s,
                     BasicTensor<T>* dx, std::span<T> dweight,
                     std::span<T> dbias) {
  if (dx) dx->reshape(x.c, x.n, x.h, x.w);
  for (int co = 0; co < s.out_channels; ++co)
    for (int ni = 0; ni < x.n; ++ni)
      for (int oy = 0; oy < dy.h; ++oy)
        for (int ox = 0; ox < dy.w; ++ox) {
          const T g = dy.at(co, ni, oy, ox);
          if (!dbias.empty()) dbias[static_cast<std::size_t>(co)] += g;
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int iy = oy * s.stride - s.padding + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int ix = ox * s.stride - s.padding + kx;
                if (ix < 0 || ix >= x.w) continue;
                const std::size_t wi =
                    ((static_cast<std::size_t>(co) * s.in_channels + ci) * s.kernel + ky) *
                        s.kernel + kx;
                dweight[wi] += g * x.at(ci, ni, iy, ix);
                if (dx) dx->at(ci, ni, iy, ix) += g * weight[wi];
              }
            }
        }
}

/// Scatter form: every input pixel spreads weight-scaled copies over the
/// output, which is the definition of a transposed convolution.
template <typename T>
void conv_transpose2d_forward(const BasicTensor<T>& x, std::span<const T> weight,
                              std::span<const T> bias, const ConvSpec& s,
                              BasicTensor<T>& y) {
  const int oh = conv_transpose_out_size(x.h, s.kernel, s.stride, s.padding,
                                         s.output_padding);
  const int ow = conv_transpose_out_size(x.w, s.kernel, s.stride, s.padding,
                                         s.output_padding);
  y.reshape(s.out_channels, x.n, oh, ow);
  for (int co = 0; co < s.out_channels; ++co)
    for (int ni = 0; ni < x.n; ++ni)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          y.at(co, ni, oy, ox) = bias.empty() ? T{} : bias[static_cast<std::size_t>(co)];
  for (int ci = 0; ci < s.in_channels; ++ci)
    for (int ni = 0; ni < x.n; ++ni)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) {
          const T v = x.at(ci, ni, iy, ix);
          for (int co = 0; co < s.out_channels; ++co)
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int oy = iy * s.stride - s.padding + ky;
              if (oy < 0 || oy >= oh) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int ox = ix * s.stride - s.padding + kx;
                if (ox < 0 || ox >= ow) continue;
                const std::size_t wi =
                    ((static_cast<std::size_t>(ci) * s.out_channels + co) * s.kernel + ky) *
                        s.kernel + kx;
                y.at(co, ni, oy, ox) += weight[wi] * v;
              }
            }
        }
}

template <typename T>
void conv_transpose2d_backward(const BasicTensor<T>& x, std::span<const T> weight,
                               const BasicTensor<T>& dy, const ConvSpec& s,
                               BasicTensor<T>* dx, std::span<T> dweight,
                               std::span<T> dbias) {
  if (dx) dx->reshape(x.c, x.n, x.h, x.w);
  if (!dbias.empty()) {
    for (int co = 0; co < s.out_channels; ++co)
      for (int ni = 0; ni < dy.n; ++ni)
        for (int oy = 0; oy < dy.h; ++oy)
          for (int ox = 0; ox < dy.w; ++ox)
            dbias[static_cast<std::size_t>(co)] += dy.at(co, ni, oy, ox);
  }
  for (int ci = 0; ci < s.in_channels; ++ci)
    for (int ni = 0; ni < x.n; ++ni)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) {
          const T v = x.at(ci, ni, iy, ix);
          T acc{};
          for (int co = 0; co < s.out_channels; ++co)
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int oy = iy * s.stride - s.padding + ky;
              if (oy < 0 || oy >= dy.h) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int ox = ix * s.stride - s.padding + kx;
                if (ox < 0 || ox >= dy.w) continue;
                const std::size_t wi =
                    ((static_cast<std::size_t>(ci) * s.out_channels + co) * s.kernel + ky) *
                        s.kernel + kx;
                const T g = dy.at(co, ni, oy, ox);
                dweight[wi] += g * v;
                acc += g * weight[wi];
              }
            }
          if (dx) dx->at(ci, ni, iy, ix) = acc;
        }
}

template <typename T>
void maxpool2d_forward(const BasicTensor<T>& x, int kernel, int stride,
                       int padding, BasicTensor<T>& y,
                       std::vector<std::int32_t>& argmax) {
  const int oh = conv_out_size(x.h, kernel, stride, padding);
  const int ow = conv_out_size(x.w, kernel, stride, padding);
  y.reshape(x.c, x.n, oh, ow);
  argmax.assign(y.size(), -1);
  std::size_t o = 0;
  for (int ci = 0; ci < x.c; ++ci)
    for (int ni = 0; ni < x.n; ++ni)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
              const int iy = oy * stride - padding + ky;
              const int ix = ox * stride - padding + kx;
              if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
              const T v = x.at(ci, ni, iy, ix);
              if (argmax[o] < 0 || v > best) {
                best = v;
                argmax[o] = static_cast<std::int32_t>(
                    ((static_cast<std::size_t>(ci) * x.n + ni) * x.h + iy) * x.w + ix);
              }
            }
          y.data[o] = best;
        }
}

template <typename T>
void maxpool2d_backward(const BasicTensor<T>& dy,
                        const std::vector<std::int32_t>& argmax,
                        BasicTensor<T>& dx) {
  for (auto& v : dx.data) v = T{};
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dx.data[static_cast<std::size_t>(argmax[i])] += dy.data[i];
  }
}

template <typename T>
void batchnorm_train_forward(const BasicTensor<T>& x, std::span<const T> gamma,
                             std::span<const T> beta, T eps, BasicTensor<T>& y) {
  y.reshape(x.c, x.n, x.h, x.w);
  const std::size_t count = x.channel_stride();
  for (int ci = 0; ci < x.c; ++ci) {
    T mean{};
    for (std::size_t i = 0; i < count; ++i) mean += x.channel(ci)[i];
    mean /= static_cast<T>(count);
    T var{};
    for (std::size_t i = 0; i < count; ++i) {
      const T d = x.channel(ci)[i] - mean;
      var += d * d;
    }
    var /= static_cast<T>(count);
    const T is = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < count; ++i) {
      y.channel(ci)[i] = gamma[static_cast<std::size_t>(ci)] * (x.channel(ci)[i] - mean) * is +
                         beta[static_cast<std::size_t>(ci)];
    }
  }
}

/// Textbook chain rule through mean and variance.
template <typename T>
void batchnorm_backward(const BasicTensor<T>& x, std::span<const T> gamma, T eps,
                        const BasicTensor<T>& dy, BasicTensor<T>& dx,
                        std::span<T> dgamma, std::span<T> dbeta) {
  dx.reshape(x.c, x.n, x.h, x.w);
  const std::size_t count = x.channel_stride();
  const T m = static_cast<T>(count);
  for (int ci = 0; ci < x.c; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const T* xp = x.channel(ci);
    const T* g = dy.channel(ci);
    T mean{};
    for (std::size_t i = 0; i < count; ++i) mean += xp[i];
    mean /= m;
    T var{};
    for (std::size_t i = 0; i < count; ++i) var += (xp[i] - mean) * (xp[i] - mean);
    var /= m;
    const T is = T(1) / std::sqrt(var + eps);
    T dvar{};
    T dmean{};
    T centered_sum{};
    for (std::size_t i = 0; i < count; ++i) {
      const T dxhat = g[i] * gamma[c];
      dvar += dxhat * (xp[i] - mean) * T(-0.5) * is * is * is;
      dmean += -dxhat * is;
      centered_sum += T(-2) * (xp[i] - mean);
      dgamma[c] += g[i] * (xp[i] - mean) * is;
      dbeta[c] += g[i];
    }
    dmean += dvar * centered_sum / m;
    T* out = dx.channel(ci);
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = g[i] * gamma[c] * is + dvar * T(2) * (xp[i] - mean) / m + dmean / m;
    }
  }
}

}  // namespace tumorseg::reference
