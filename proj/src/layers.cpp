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

#include "tumorseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tumorseg/error.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

Parameter* ParameterStore::add(const std::string& name, std::vector<int> shape,
                               ParamGroup group) {
  require(find(name) == nullptr, ErrorCode::kInvalidArgument,
          "duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  p->shape = std::move(shape);
  p->value.assign(n, 0.0f);
  p->grad.assign(n, 0.0f);
  p->group = group;
  params_.push_back(std::move(p));
  return params_.back().get();
}

Buffer* ParameterStore::add_buffer(const std::string& name, std::vector<int> shape,
                                   float fill) {
  auto b = std::make_unique<Buffer>();
  b->name = name;
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int v) { return a * static_cast<std::size_t>(v); });
  b->shape = std::move(shape);
  b->value.assign(n, fill);
  buffers_.push_back(std::move(b));
  return buffers_.back().get();
}

Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Buffer* ParameterStore::find_buffer(const std::string& name) const {
  for (const auto& b : buffers_)
    if (b->name == name) return b.get();
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

void he_normal(Parameter& p, double fan_in, std::uint64_t seed) {
  std::mt19937_64 gen(derive_seed(seed, p.name));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / std::max(fan_in, 1.0)));
  for (float& v : p.value) v = static_cast<float>(dist(gen));
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(ParameterStore& store, const std::string& name,
               const ConvSpec& spec, bool with_bias, ParamGroup group)
    : spec_(spec) {
  weight_ = store.add(name + ".weight",
                      {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel},
                      group);
  if (with_bias) bias_ = store.add(name + ".bias", {spec.out_channels}, group);
}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  return infer(x);
}

Tensor Conv2d::infer(const Tensor& x) const {
  Tensor y;
  kernels::conv2d_forward(x, weight_->value,
                          bias_ ? std::span<const float>(bias_->value)
                                : std::span<const float>(),
                          spec_, y);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool need_input_grad) {
  Tensor dx;
  kernels::conv2d_backward(input_, weight_->value, dy, spec_,
                           need_input_grad ? &dx : nullptr, weight_->grad,
                           bias_ ? std::span<float>(bias_->grad) : std::span<float>());
  return dx;
}

ConvTranspose2d::ConvTranspose2d(ParameterStore& store, const std::string& name,
                                 const ConvSpec& spec, bool with_bias,
                                 ParamGroup group)
    : spec_(spec) {
  weight_ = store.add(name + ".weight",
                      {spec.in_channels, spec.out_channels, spec.kernel, spec.kernel},
                      group);
  if (with_bias) bias_ = store.add(name + ".bias", {spec.out_channels}, group);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  input_ = x;
  return infer(x);
}

Tensor ConvTranspose2d::infer(const Tensor& x) const {
  Tensor y;
  kernels::conv_transpose2d_forward(x, weight_->value,
                                    bias_ ? std::span<const float>(bias_->value)
                                          : std::span<const float>(),
                                    spec_, y);
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  Tensor dx;
  kernels::conv_transpose2d_backward(
      input_, weight_->value, dy, spec_, &dx, weight_->grad,
      bias_ ? std::span<float>(bias_->grad) : std::span<float>());
  return dx;
}

BatchNorm2d::BatchNorm2d(ParameterStore& store, const std::string& name,
                         int channels, ParamGroup group) {
  gamma_ = store.add(name + ".weight", {channels}, group);
  std::fill(gamma_->value.begin(), gamma_->value.end(), 1.0f);
  beta_ = store.add(name + ".bias", {channels}, group);
  running_mean_ = store.add_buffer(name + ".running_mean", {channels}, 0.0f);
  running_var_ = store.add_buffer(name + ".running_var", {channels}, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x) {
  Tensor y;
  std::vector<float> mean, var;
  kernels::batchnorm_train_forward(x, gamma_->value, beta_->value, kEps, y, xhat_,
                                   mean, var, invstd_);
  const double count = static_cast<double>(x.channel_stride());
  const double unbias = count > 1 ? count / (count - 1) : 1.0;
  for (std::size_t c = 0; c < mean.size(); ++c) {
    running_mean_->value[c] = (1 - kMomentum) * running_mean_->value[c] + kMomentum * mean[c];
    running_var_->value[c] = static_cast<float>(
        (1 - kMomentum) * running_var_->value[c] + kMomentum * var[c] * unbias);
  }
  return y;
}

Tensor BatchNorm2d::infer(const Tensor& x) const {
  Tensor y;
  kernels::batchnorm_eval_forward(x, gamma_->value, beta_->value,
                                  running_mean_->value, running_var_->value,
                                  kEps, y);
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  Tensor dx;
  kernels::batchnorm_backward(dy, xhat_, gamma_->value, invstd_, dx,
                              gamma_->grad, beta_->grad);
  return dx;
}

Tensor MaxPool2d::forward(const Tensor& x) {
  in_c_ = x.c;
  in_n_ = x.n;
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor y;
  kernels::maxpool2d_forward(x, kernel_, stride_, padding_, y, argmax_);
  return y;
}

Tensor MaxPool2d::infer(const Tensor& x) const {
  Tensor y;
  std::vector<std::int32_t> scratch;
  kernels::maxpool2d_forward(x, kernel_, stride_, padding_, y, scratch);
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(in_c_, in_n_, in_h_, in_w_);
  kernels::maxpool2d_backward(dy, argmax_, dx);
  return dx;
}

// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(ParameterStore& store, const std::string& name,
                       int in_channels, int out_channels, int stride) {
  const auto g = ParamGroup::kEncoder;
  conv1_ = Conv2d(store, name + ".conv1", {in_channels, out_channels, 3, stride, 1}, false, g);
  bn1_ = BatchNorm2d(store, name + ".bn1", out_channels, g);
  conv2_ = Conv2d(store, name + ".conv2", {out_channels, out_channels, 3, 1, 1}, false, g);
  bn2_ = BatchNorm2d(store, name + ".bn2", out_channels, g);
  has_downsample_ = stride != 1 || in_channels != out_channels;
  if (has_downsample_) {
    down_conv_ = Conv2d(store, name + ".downsample.0",
                        {in_channels, out_channels, 1, stride, 0}, false, g);
    down_bn_ = BatchNorm2d(store, name + ".downsample.1", out_channels, g);
  }
}

Tensor BasicBlock::forward(const Tensor& x) {
  hidden_ = bn1_.forward(conv1_.forward(x));
  kernels::relu_inplace(hidden_);
  Tensor out = bn2_.forward(conv2_.forward(hidden_));
  if (has_downsample_) {
    kernels::add_inplace(out, down_bn_.forward(down_conv_.forward(x)));
  } else {
    kernels::add_inplace(out, x);
  }
  kernels::relu_inplace(out);
  out_ = out;
  return out;
}

Tensor BasicBlock::infer(const Tensor& x) const {
  Tensor h = bn1_.infer(conv1_.infer(x));
  kernels::relu_inplace(h);
  Tensor out = bn2_.infer(conv2_.infer(h));
  if (has_downsample_) {
    kernels::add_inplace(out, down_bn_.infer(down_conv_.infer(x)));
  } else {
    kernels::add_inplace(out, x);
  }
  kernels::relu_inplace(out);
  return out;
}

Tensor BasicBlock::backward(const Tensor& dy) {
  Tensor d = dy;
  kernels::relu_backward_inplace(out_, d);
  Tensor dh = conv2_.backward(bn2_.backward(d));
  kernels::relu_backward_inplace(hidden_, dh);
  Tensor dx = conv1_.backward(bn1_.backward(dh));
  if (has_downsample_) {
    kernels::add_inplace(dx, down_conv_.backward(down_bn_.backward(d)));
  } else {
    kernels::add_inplace(dx, d);
  }
  return dx;
}

DecoderBlock::DecoderBlock(ParameterStore& store, const std::string& name,
                           int in_channels, int out_channels) {
  const auto g = ParamGroup::kDecoder;
  const int mid = in_channels / 4;
  conv1_ = Conv2d(store, name + ".conv1", {in_channels, mid, 1, 1, 0}, true, g);
  norm1_ = BatchNorm2d(store, name + ".norm1", mid, g);
  deconv2_ = ConvTranspose2d(store, name + ".deconv2", {mid, mid, 3, 2, 1, 1}, true, g);
  norm2_ = BatchNorm2d(store, name + ".norm2", mid, g);
  conv3_ = Conv2d(store, name + ".conv3", {mid, out_channels, 1, 1, 0}, true, g);
  norm3_ = BatchNorm2d(store, name + ".norm3", out_channels, g);
}

Tensor DecoderBlock::forward(const Tensor& x) {
  a1_ = norm1_.forward(conv1_.forward(x));
  kernels::relu_inplace(a1_);
  a2_ = norm2_.forward(deconv2_.forward(a1_));
  kernels::relu_inplace(a2_);
  a3_ = norm3_.forward(conv3_.forward(a2_));
  kernels::relu_inplace(a3_);
  return a3_;
}

Tensor DecoderBlock::infer(const Tensor& x) const {
  Tensor a = norm1_.infer(conv1_.infer(x));
  kernels::relu_inplace(a);
  a = norm2_.infer(deconv2_.infer(a));
  kernels::relu_inplace(a);
  a = norm3_.infer(conv3_.infer(a));
  kernels::relu_inplace(a);
  return a;
}

Tensor DecoderBlock::backward(const Tensor& dy) {
  Tensor d = dy;
  kernels::relu_backward_inplace(a3_, d);
  d = conv3_.backward(norm3_.backward(d));
  kernels::relu_backward_inplace(a2_, d);
  d = deconv2_.backward(norm2_.backward(d));
  kernels::relu_backward_inplace(a1_, d);
  return conv1_.backward(norm1_.backward(d));
}

}  // namespace tumorseg
