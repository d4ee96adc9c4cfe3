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

#include "tumorseg/network.hpp"

#include <cmath>

#include "tumorseg/archive.hpp"
#include "tumorseg/error.hpp"

namespace tumorseg {

void NetworkConfig::validate() const {
  require(in_channels >= 1, ErrorCode::kConfig, "network.in_channels must be >= 1");
  require(out_classes >= 1, ErrorCode::kConfig, "network.out_classes must be >= 1");
  require(encoder_lr_factor > 0 && encoder_lr_factor <= 1, ErrorCode::kConfig,
          "network.encoder_lr_factor must lie in (0, 1]");
}

SegNetwork::SegNetwork(const NetworkConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParameterStore>()) {
  cfg_.validate();
  auto& s = *store_;
  const auto enc = ParamGroup::kEncoder;
  const auto dec = ParamGroup::kDecoder;

  conv1_ = Conv2d(s, "conv1", {cfg.in_channels, 64, 7, 2, 3}, false, enc);
  bn1_ = BatchNorm2d(s, "bn1", 64, enc);
  int in = 64;
  for (int st = 0; st < 4; ++st) {
    const int out = kStageChannels[static_cast<std::size_t>(st)];
    for (int b = 0; b < kStageBlocks[static_cast<std::size_t>(st)]; ++b) {
      const int stride = (st > 0 && b == 0) ? 2 : 1;
      stages_[static_cast<std::size_t>(st)].emplace_back(
          s, "layer" + std::to_string(st + 1) + "." + std::to_string(b),
          b == 0 ? in : out, out, stride);
    }
    in = out;
  }
  // decoder4: 512 -> 256, decoder3: 256 -> 128, decoder2: 128 -> 64, decoder1: 64 -> 64.
  decoders_[3] = DecoderBlock(s, "decoder4", 512, 256);
  decoders_[2] = DecoderBlock(s, "decoder3", 256, 128);
  decoders_[1] = DecoderBlock(s, "decoder2", 128, 64);
  decoders_[0] = DecoderBlock(s, "decoder1", 64, 64);
  final_deconv1_ = ConvTranspose2d(s, "finaldeconv1", {64, 32, 3, 2, 0, 0}, true, dec);
  final_conv2_ = Conv2d(s, "finalconv2", {32, 32, 3, 1, 0}, true, dec);
  final_conv3_ = Conv2d(s, "finalconv3", {32, cfg.out_classes, 2, 1, 1}, true, dec);

  for (const auto& p : s.parameters()) {
    if (p->shape.size() != 4) continue;  // biases and norm params keep defaults
    const bool transposed = p->name.find("deconv") != std::string::npos;
    double fan_in;
    if (transposed) {
      // Each output of a stride-2 transposed conv sees about k*k/4 taps per input channel.
      fan_in = static_cast<double>(p->shape[0]) * p->shape[2] * p->shape[3] / 4.0;
    } else {
      fan_in = static_cast<double>(p->shape[1]) * p->shape[2] * p->shape[3];
    }
    he_normal(*p, fan_in, seed);
  }
}

void SegNetwork::check_input(const Tensor& batch) const {
  require(batch.n >= 1, ErrorCode::kShapeMismatch, "empty batch");
  require(batch.c == cfg_.in_channels, ErrorCode::kShapeMismatch,
          "input has " + std::to_string(batch.c) + " channels, network expects " +
              std::to_string(cfg_.in_channels));
  require(batch.h % 32 == 0 && batch.w % 32 == 0 && batch.h > 0 && batch.w > 0,
          ErrorCode::kShapeMismatch,
          "input not multiple of 32: " + std::to_string(batch.h) + "x" +
              std::to_string(batch.w));
  for (float v : batch.data) {
    require(std::isfinite(v), ErrorCode::kNonFinite, "non-finite input value");
  }
}

Tensor SegNetwork::stem_response(const Tensor& batch) const {
  return conv1_.infer(batch);
}

Tensor SegNetwork::forward(const Tensor& batch) {
  check_input(batch);
  Tensor x = bn1_.forward(conv1_.forward(batch));
  kernels::relu_inplace(x);
  stem_out_ = x;
  x = maxpool_.forward(x);
  std::array<Tensor, 4> e;
  for (std::size_t st = 0; st < 4; ++st) {
    for (auto& block : stages_[st]) x = block.forward(x);
    e[st] = x;
  }
  Tensor d = decoders_[3].forward(e[3]);
  kernels::add_inplace(d, e[2]);
  d = decoders_[2].forward(d);
  kernels::add_inplace(d, e[1]);
  d = decoders_[1].forward(d);
  kernels::add_inplace(d, e[0]);
  d = decoders_[0].forward(d);

  f1_ = final_deconv1_.forward(d);
  kernels::relu_inplace(f1_);
  f3_ = final_conv2_.forward(f1_);
  kernels::relu_inplace(f3_);
  Tensor out = final_conv3_.forward(f3_);
  kernels::sigmoid_inplace(out);
  return out;
}

void SegNetwork::backward(const Tensor& dlogits) {
  Tensor g = final_conv3_.backward(dlogits);
  kernels::relu_backward_inplace(f3_, g);
  g = final_conv2_.backward(g);
  kernels::relu_backward_inplace(f1_, g);
  g = final_deconv1_.backward(g);

  // g is d/d(d1); walk the decoder chain, fanning each sum back to its
  // encoder stage.
  Tensor dd2 = decoders_[0].backward(g);
  Tensor dd3 = decoders_[1].backward(dd2);
  Tensor dd4 = decoders_[2].backward(dd3);
  Tensor de4 = decoders_[3].backward(dd4);

  std::array<Tensor*, 4> skip{&dd2, &dd3, &dd4, nullptr};
  Tensor grad = std::move(de4);
  for (int st = 3; st >= 0; --st) {
    if (skip[static_cast<std::size_t>(st)]) {
      kernels::add_inplace(grad, *skip[static_cast<std::size_t>(st)]);
    }
    auto& blocks = stages_[static_cast<std::size_t>(st)];
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) grad = it->backward(grad);
  }
  grad = maxpool_.backward(grad);
  kernels::relu_backward_inplace(stem_out_, grad);
  conv1_.backward(bn1_.backward(grad), false);
}

Tensor SegNetwork::predict(const Tensor& batch) const {
  check_input(batch);
  Tensor x = bn1_.infer(conv1_.infer(batch));
  kernels::relu_inplace(x);
  x = maxpool_.infer(x);
  std::array<Tensor, 4> e;
  for (std::size_t st = 0; st < 4; ++st) {
    for (const auto& block : stages_[st]) x = block.infer(x);
    e[st] = x;
  }
  Tensor d = decoders_[3].infer(e[3]);
  kernels::add_inplace(d, e[2]);
  d = decoders_[2].infer(d);
  kernels::add_inplace(d, e[1]);
  d = decoders_[1].infer(d);
  kernels::add_inplace(d, e[0]);
  d = decoders_[0].infer(d);
  Tensor out = head_logits(d);
  kernels::sigmoid_inplace(out);
  return out;
}

Tensor SegNetwork::head_logits(const Tensor& d1) const {
  Tensor f = final_deconv1_.infer(d1);
  kernels::relu_inplace(f);
  f = final_conv2_.infer(f);
  kernels::relu_inplace(f);
  return final_conv3_.infer(f);
}

std::vector<float> adapt_input_weights(std::span<const float> stem_weights,
                                       int in_channels) {
  require(in_channels >= 1, ErrorCode::kInvalidArgument,
          "in_channels must be >= 1");
  constexpr int kOut = 64, kSrc = 3, kTaps = 49;
  require(stem_weights.size() == static_cast<std::size_t>(kOut * kSrc * kTaps),
          ErrorCode::kShapeMismatch, "stem weights must have shape (64, 3, 7, 7)");
  if (in_channels == kSrc) return {stem_weights.begin(), stem_weights.end()};
  std::vector<float> out(static_cast<std::size_t>(kOut) * in_channels * kTaps);
  for (int o = 0; o < kOut; ++o)
    for (int t = 0; t < kTaps; ++t) {
      double sum = 0;
      for (int c = 0; c < kSrc; ++c) {
        sum += stem_weights[static_cast<std::size_t>((o * kSrc + c) * kTaps + t)];
      }
      const double per = in_channels == 1 ? sum : sum / in_channels;
      for (int c = 0; c < in_channels; ++c) {
        out[static_cast<std::size_t>((o * in_channels + c) * kTaps + t)] =
            static_cast<float>(per);
      }
    }
  return out;
}

void load_pretrained_encoder(SegNetwork& net, const std::filesystem::path& path) {
  std::error_code ec;
  require(!path.empty() && std::filesystem::is_regular_file(path, ec),
          ErrorCode::kUnavailable,
          "pretrained weights unavailable: '" + path.string() + "'");
  const TensorArchive archive = read_archive(path);
  auto lookup = [&](const std::string& name) -> const ArchiveTensor& {
    auto it = archive.tensors.find(name);
    require(it != archive.tensors.end(), ErrorCode::kFormat,
            "pretrained archive lacks tensor " + name);
    return it->second;
  };
  auto& store = net.store();
  for (const auto& p : store.parameters()) {
    if (p->group != ParamGroup::kEncoder) continue;
    const ArchiveTensor& t = lookup(p->name);
    if (p->name == "conv1.weight") {
      require(t.shape == std::vector<int>{64, 3, 7, 7}, ErrorCode::kShapeMismatch,
              "pretrained conv1.weight must be (64, 3, 7, 7)");
      p->value = adapt_input_weights(t.values, net.config().in_channels);
      continue;
    }
    require(t.shape == p->shape, ErrorCode::kShapeMismatch,
            "pretrained tensor " + p->name + " has the wrong shape");
    p->value = t.values;
  }
  for (const auto& b : store.buffers()) {
    if (b->name.rfind("decoder", 0) == 0) continue;
    const ArchiveTensor& t = lookup(b->name);
    require(t.values.size() == b->value.size(), ErrorCode::kShapeMismatch,
            "pretrained buffer " + b->name + " has the wrong size");
    b->value = t.values;
  }
}

SegNetwork build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SegNetwork net(cfg, seed);
  if (cfg.pretrained_encoder) load_pretrained_encoder(net, cfg.pretrained_path);
  return net;
}

std::size_t ParameterGroup::element_count() const {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

ParameterGroups parameter_groups(SegNetwork& net, double base_lr,
                                 const NetworkConfig& cfg) {
  require(base_lr > 0 && std::isfinite(base_lr), ErrorCode::kInvalidArgument,
          "base_lr must be > 0");
  cfg.validate();
  ParameterGroups g;
  g.encoder.name = "encoder";
  g.encoder.lr = base_lr * cfg.encoder_lr_factor;
  g.decoder.name = "decoder";
  g.decoder.lr = base_lr;
  for (const auto& p : net.store().parameters()) {
    (p->group == ParamGroup::kEncoder ? g.encoder : g.decoder).params.push_back(p.get());
  }
  return g;
}

}  // namespace tumorseg
