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
#include <filesystem>
#include <string>
#include <vector>

#include "tumorseg/config.hpp"
#include "tumorseg/network.hpp"
#include "tumorseg/optimizer.hpp"

namespace tumorseg {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_soft_dice = 0;
  double seconds = 0;
};

class TrainHistory {
 public:
  /// Records must arrive with strictly increasing epoch indices.
  void append(const EpochRecord& r);
  const std::vector<EpochRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<EpochRecord> records_;
};

struct CheckpointMeta {
  NetworkConfig network;
  Target target = Target::kOrgan;
  int epoch = 0;  // completed epochs
  std::string config_hash;
  int input_k = 1;
  int height = 64;
  int width = 64;
  WindowSpec window;
  double base_lr = 0;
  std::uint64_t seed = 0;
  double best_val_loss = 0;
  TrainHistory history;
};

void save_checkpoint(const std::filesystem::path& path, const SegNetwork& net,
                     const Adam* optimizer, const CheckpointMeta& meta);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

struct LoadedModel {
  SegNetwork net;
  CheckpointMeta meta;
};

/// Restores the network. Throws kConfig when `expected` is given and its
/// architecture differs from the stored one.
LoadedModel load_model(const std::filesystem::path& path,
                       const NetworkConfig* expected = nullptr);

/// Restores weights from `path` into `net` and, when given, the optimizer
/// moments and step count.
CheckpointMeta load_checkpoint_into(const std::filesystem::path& path,
                                    SegNetwork& net, Adam* optimizer);

}  // namespace tumorseg
