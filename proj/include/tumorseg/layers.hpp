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
#include <memory>
#include <string>
#include <vector>

#include "tumorseg/kernels.hpp"
#include "tumorseg/tensor.hpp"

namespace tumorseg {

enum class ParamGroup { kEncoder, kDecoder };

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;
  ParamGroup group = ParamGroup::kDecoder;

  std::size_t size() const { return value.size(); }
};

/// Non-trainable state, e.g. batch-norm running statistics.
struct Buffer {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
};

/// Owns parameters at stable addresses so layers can hold raw pointers.
class ParameterStore {
 public:
  Parameter* add(const std::string& name, std::vector<int> shape, ParamGroup group);
  Buffer* add_buffer(const std::string& name, std::vector<int> shape, float fill);

  const std::vector<std::unique_ptr<Parameter>>& parameters() const { return params_; }
  const std::vector<std::unique_ptr<Buffer>>& buffers() const { return buffers_; }
  Parameter* find(const std::string& name) const;
  Buffer* find_buffer(const std::string& name) const;
  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::vector<std::unique_ptr<Buffer>> buffers_;
};

/// He (fan-in) normal initialization, seeded by the parameter name.
void he_normal(Parameter& p, double fan_in, std::uint64_t seed);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, const ConvSpec& spec,
         bool with_bias, ParamGroup group);

  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  /// Returns the input gradient unless `need_input_grad` is false.
  Tensor backward(const Tensor& dy, bool need_input_grad = true);

  const ConvSpec& spec() const { return spec_; }
  Parameter* weight() const { return weight_; }
  Parameter* bias() const { return bias_; }

 private:
  ConvSpec spec_;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  Tensor input_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterStore& store, const std::string& name,
                  const ConvSpec& spec, bool with_bias, ParamGroup group);

  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);

  Parameter* weight() const { return weight_; }
  Parameter* bias() const { return bias_; }

 private:
  ConvSpec spec_;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  Tensor input_;
};

class BatchNorm2d {
 public:
  static constexpr float kEps = 1e-5f;
  static constexpr float kMomentum = 0.1f;

  BatchNorm2d() = default;
  BatchNorm2d(ParameterStore& store, const std::string& name, int channels,
              ParamGroup group);

  /// Training mode: normalizes with batch statistics and updates the
  /// running estimates.
  Tensor forward(const Tensor& x);
  /// Evaluation mode: running statistics only; no state changes.
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);

  Parameter* gamma() const { return gamma_; }
  Parameter* beta() const { return beta_; }

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
  Buffer* running_mean_ = nullptr;
  Buffer* running_var_ = nullptr;
  Tensor xhat_;
  std::vector<float> invstd_;
};

class MaxPool2d {
 public:
  MaxPool2d(int kernel = 3, int stride = 2, int padding = 1)
      : kernel_(kernel), stride_(stride), padding_(padding) {}

  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);

 private:
  int kernel_, stride_, padding_;
  int in_c_ = 0, in_n_ = 0, in_h_ = 0, in_w_ = 0;
  std::vector<std::int32_t> argmax_;
};

/// ResNet basic block: two 3x3 convolutions with an identity or projected
/// shortcut.
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(ParameterStore& store, const std::string& name, int in_channels,
             int out_channels, int stride);

  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);

 private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  bool has_downsample_ = false;
  Conv2d down_conv_;
  BatchNorm2d down_bn_;
  Tensor hidden_;  // post-ReLU activation inside the block
  Tensor out_;
};

/// LinkNet decoder block: 1x1 reduce by 4, 3x3 stride-2 transposed conv,
/// 1x1 expand, each followed by batch norm and ReLU.
class DecoderBlock {
 public:
  DecoderBlock() = default;
  DecoderBlock(ParameterStore& store, const std::string& name, int in_channels,
               int out_channels);

  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);

 private:
  Conv2d conv1_;
  BatchNorm2d norm1_;
  ConvTranspose2d deconv2_;
  BatchNorm2d norm2_;
  Conv2d conv3_;
  BatchNorm2d norm3_;
  Tensor a1_, a2_, a3_;
};

}  // namespace tumorseg
