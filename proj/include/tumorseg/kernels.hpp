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

#include <cstdint>
#include <span>
#include <vector>

#include "tumorseg/tensor.hpp"

namespace tumorseg {

/// Geometry of a 2D convolution or transposed convolution. Convolution
/// weights are [out][in][k][k]; transposed-convolution weights are
/// [in][out][k][k].
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int output_padding = 0;  // transposed only

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel * kernel;
  }
};

constexpr int conv_out_size(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

constexpr int conv_transpose_out_size(int in, int kernel, int stride,
                                      int padding, int output_padding) {
  return (in - 1) * stride - 2 * padding + kernel + output_padding;
}

/// OpenMP/BLAS kernels used by the network. Each has a serial counterpart in
/// kernels_ref.hpp that the tests and benchmarks compare against.
namespace kernels {

void im2col(const Tensor& x, int kernel, int stride, int padding, int out_h,
            int out_w, std::vector<float>& col);
void im2col(const Tensor& x, int kernel, int stride, int padding, int out_h,
            int out_w, float* col);

/// Accumulates columns back into `x`, which must already be sized.
void col2im(const std::vector<float>& col, int kernel, int stride, int padding,
            int out_h, int out_w, Tensor& x);
void col2im(const float* col, int kernel, int stride, int padding, int out_h,
            int out_w, Tensor& x);

/// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc);

void conv2d_forward(const Tensor& x, std::span<const float> weight,
                    std::span<const float> bias, const ConvSpec& spec,
                    Tensor& y);

/// Accumulates into `dweight` and `dbias`; `dx` may be null.
void conv2d_backward(const Tensor& x, std::span<const float> weight,
                     const Tensor& dy, const ConvSpec& spec, Tensor* dx,
                     std::span<float> dweight, std::span<float> dbias);

void conv_transpose2d_forward(const Tensor& x, std::span<const float> weight,
                              std::span<const float> bias, const ConvSpec& spec,
                              Tensor& y);

void conv_transpose2d_backward(const Tensor& x, std::span<const float> weight,
                               const Tensor& dy, const ConvSpec& spec,
                               Tensor* dx, std::span<float> dweight,
                               std::span<float> dbias);

void maxpool2d_forward(const Tensor& x, int kernel, int stride, int padding,
                       Tensor& y, std::vector<std::int32_t>& argmax);

void maxpool2d_backward(const Tensor& dy, const std::vector<std::int32_t>& argmax,
                        Tensor& dx);

/// Batch statistics; `xhat` and `invstd` are kept for the backward pass.
void batchnorm_train_forward(const Tensor& x, std::span<const float> gamma,
                             std::span<const float> beta, float eps, Tensor& y,
                             Tensor& xhat, std::vector<float>& mean,
                             std::vector<float>& var, std::vector<float>& invstd);

void batchnorm_backward(const Tensor& dy, const Tensor& xhat,
                        std::span<const float> gamma,
                        const std::vector<float>& invstd, Tensor& dx,
                        std::span<float> dgamma, std::span<float> dbeta);

void batchnorm_eval_forward(const Tensor& x, std::span<const float> gamma,
                            std::span<const float> beta,
                            std::span<const float> running_mean,
                            std::span<const float> running_var, float eps,
                            Tensor& y);

void relu_inplace(Tensor& x);

/// dx = dy where y > 0, else 0 (in place on dy).
void relu_backward_inplace(const Tensor& y, Tensor& dy);

void add_inplace(Tensor& acc, const Tensor& x);

void sigmoid_inplace(Tensor& x);

}  // namespace kernels
}  // namespace tumorseg
