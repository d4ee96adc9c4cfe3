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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tumorseg/layers.hpp"
#include "tumorseg/tensor.hpp"

namespace tumorseg {

struct NetworkConfig {
  int in_channels = 1;
  int out_classes = 1;
  bool pretrained_encoder = false;
  /// Encoder weights in the tensor-archive format with torchvision
  /// ResNet-34 parameter names (see tools/export_resnet34.py).
  std::string pretrained_path;
  double encoder_lr_factor = 0.1;

  void validate() const;
  /// Equality of everything that shapes the parameter set.
  bool architecture_equals(const NetworkConfig& o) const {
    return in_channels == o.in_channels && out_classes == o.out_classes;
  }
};

/// LinkNet-34: ResNet-34 encoder, four LinkNet decoder blocks whose outputs
/// are added to the matching encoder stage, and a transposed-conv head that
/// restores the input resolution. The output is a per-pixel sigmoid.
class SegNetwork {
 public:
  static constexpr std::array<int, 4> kStageBlocks{3, 4, 6, 3};
  static constexpr std::array<int, 4> kStageChannels{64, 128, 256, 512};

  SegNetwork(const NetworkConfig& cfg, std::uint64_t seed);
  SegNetwork(const SegNetwork&) = delete;
  SegNetwork& operator=(const SegNetwork&) = delete;
  SegNetwork(SegNetwork&&) = default;
  SegNetwork& operator=(SegNetwork&&) = default;

  const NetworkConfig& config() const { return cfg_; }

  /// Training-mode pass; caches activations for backward().
  Tensor forward(const Tensor& batch);
  /// Back-propagates d(loss)/d(logit) from the last forward() and
  /// accumulates parameter gradients.
  void backward(const Tensor& dlogits);
  /// Evaluation-mode pass. Reads parameters only, so concurrent calls on
  /// one instance are safe.
  Tensor predict(const Tensor& batch) const;

  /// Output of the stem convolution alone (before batch norm).
  Tensor stem_response(const Tensor& batch) const;

  ParameterStore& store() { return *store_; }
  const ParameterStore& store() const { return *store_; }
  std::size_t parameter_count() const { return store_->parameter_count(); }

 private:
  void check_input(const Tensor& batch) const;
  Tensor head_logits(const Tensor& d1) const;

  NetworkConfig cfg_;
  std::unique_ptr<ParameterStore> store_;
  Conv2d conv1_;
  BatchNorm2d bn1_;
  MaxPool2d maxpool_;
  std::array<std::vector<BasicBlock>, 4> stages_;
  std::array<DecoderBlock, 4> decoders_;  // decoders_[i] == "decoder{i+1}"
  ConvTranspose2d final_deconv1_;
  Conv2d final_conv2_;
  Conv2d final_conv3_;

  Tensor stem_out_;
  Tensor f1_, f3_;
};

/// Builds the network. With `pretrained_encoder` the encoder is loaded from
/// `pretrained_path` and the stem adapted to `in_channels`.
SegNetwork build_network(const NetworkConfig& cfg, std::uint64_t seed = 0);

/// Converts 3-channel stem weights (64, 3, 7, 7) to `in_channels`: one
/// channel gets the sum over RGB; k channels get that sum divided by k,
/// replicated. Three channels pass through unchanged.
std::vector<float> adapt_input_weights(std::span<const float> stem_weights,
                                       int in_channels);

/// Copies encoder weights from a torchvision-named archive into `net`.
void load_pretrained_encoder(SegNetwork& net, const std::filesystem::path& path);

struct ParameterGroup {
  std::string name;
  double lr = 0.0;
  std::vector<Parameter*> params;

  std::size_t element_count() const;
};

struct ParameterGroups {
  ParameterGroup encoder;
  ParameterGroup decoder;
};

ParameterGroups parameter_groups(SegNetwork& net, double base_lr,
                                 const NetworkConfig& cfg);

}  // namespace tumorseg
