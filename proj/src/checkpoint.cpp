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

#include "tumorseg/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "tumorseg/archive.hpp"
#include "tumorseg/error.hpp"

namespace tumorseg {

using nlohmann::json;

void TrainHistory::append(const EpochRecord& r) {
  require(records_.empty() || r.epoch > records_.back().epoch,
          ErrorCode::kInvalidArgument, "history epochs must increase");
  records_.push_back(r);
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_soft_dice,seconds\n";
  char line[256];
  for (const auto& r : records_) {
    std::snprintf(line, sizeof line, "%d,%.8g,%.8g,%.8g,%.3f\n", r.epoch,
                  r.train_loss, r.val_loss, r.val_soft_dice, r.seconds);
    out << line;
  }
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

namespace {

json meta_to_json(const CheckpointMeta& m, std::int64_t adam_step) {
  json hist = json::array();
  for (const auto& r : m.history.records())
    hist.push_back({r.epoch, r.train_loss, r.val_loss, r.val_soft_dice, r.seconds});
  return {{"kind", "tumorseg-checkpoint"},
          {"network", to_json(m.network)},
          {"target", to_string(m.target)},
          {"epoch", m.epoch},
          {"config_hash", m.config_hash},
          {"input_k", m.input_k},
          {"size", {m.height, m.width}},
          {"window", to_json(m.window)},
          {"base_lr", m.base_lr},
          {"seed", m.seed},
          {"best_val_loss", m.best_val_loss},
          {"adam_step", adam_step},
          {"history", hist}};
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta m;
  try {
    require(j.at("kind") == "tumorseg-checkpoint", ErrorCode::kFormat,
            "corrupt checkpoint: not a checkpoint archive");
    m.network = network_config_from_json(j.at("network"));
    m.target = parse_target(j.at("target").get<std::string>());
    m.epoch = j.at("epoch").get<int>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.input_k = j.at("input_k").get<int>();
    m.height = j.at("size").at(0).get<int>();
    m.width = j.at("size").at(1).get<int>();
    m.window = window_from_json(j.at("window"));
    m.base_lr = j.at("base_lr").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.best_val_loss = j.at("best_val_loss").get<double>();
    for (const auto& r : j.at("history")) {
      m.history.append({r.at(0).get<int>(), r.at(1).get<double>(),
                        r.at(2).get<double>(), r.at(3).get<double>(),
                        r.at(4).get<double>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("corrupt checkpoint metadata: ") + e.what());
  }
  return m;
}

const ArchiveTensor& take(const TensorArchive& a, const std::string& name,
                          std::size_t size) {
  const auto it = a.tensors.find(name);
  require(it != a.tensors.end(), ErrorCode::kFormat,
          "corrupt checkpoint: missing tensor " + name);
  require(it->second.values.size() == size, ErrorCode::kFormat,
          "corrupt checkpoint: size mismatch for " + name);
  return it->second;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SegNetwork& net,
                     const Adam* optimizer, const CheckpointMeta& meta) {
  TensorArchive a;
  a.meta = meta_to_json(meta, optimizer ? optimizer->step_count() : 0);
  a.meta["has_optimizer"] = optimizer != nullptr;
  for (const auto& p : net.store().parameters())
    a.tensors["param/" + p->name] = {p->shape, p->value};
  for (const auto& b : net.store().buffers())
    a.tensors["buffer/" + b->name] = {b->shape, b->value};
  if (optimizer) {
    for (const auto& s : optimizer->slots()) {
      a.tensors["adam_m/" + s.param->name] = {s.param->shape, s.m};
      a.tensors["adam_v/" + s.param->name] = {s.param->shape, s.v};
    }
  }
  write_archive(a, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  return meta_from_json(read_archive(path).meta);
}

CheckpointMeta load_checkpoint_into(const std::filesystem::path& path,
                                    SegNetwork& net, Adam* optimizer) {
  const TensorArchive a = read_archive(path);
  CheckpointMeta meta = meta_from_json(a.meta);
  require(meta.network.architecture_equals(net.config()), ErrorCode::kConfig,
          "checkpoint network config mismatch: stored in_channels=" +
              std::to_string(meta.network.in_channels) + ", requested " +
              std::to_string(net.config().in_channels));
  for (const auto& p : net.store().parameters())
    p->value = take(a, "param/" + p->name, p->size()).values;
  for (const auto& b : net.store().buffers())
    b->value = take(a, "buffer/" + b->name, b->value.size()).values;
  if (optimizer) {
    require(a.meta.value("has_optimizer", false), ErrorCode::kFormat,
            "checkpoint has no optimizer state");
    for (auto& s : optimizer->slots()) {
      s.m = take(a, "adam_m/" + s.param->name, s.param->size()).values;
      s.v = take(a, "adam_v/" + s.param->name, s.param->size()).values;
    }
    optimizer->set_step_count(a.meta.at("adam_step").get<std::int64_t>());
  }
  return meta;
}

LoadedModel load_model(const std::filesystem::path& path,
                       const NetworkConfig* expected) {
  const CheckpointMeta stored = read_checkpoint_meta(path);
  if (expected) {
    require(stored.network.architecture_equals(*expected), ErrorCode::kConfig,
            "checkpoint network config mismatch: stored in_channels=" +
                std::to_string(stored.network.in_channels) + ", requested " +
                std::to_string(expected->in_channels));
  }
  NetworkConfig cfg = stored.network;
  cfg.pretrained_encoder = false;  // weights come from the checkpoint
  SegNetwork net(cfg, 0);
  CheckpointMeta meta = load_checkpoint_into(path, net, nullptr);
  return {std::move(net), std::move(meta)};
}

}  // namespace tumorseg
