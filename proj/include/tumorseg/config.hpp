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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumorseg/augment.hpp"
#include "tumorseg/network.hpp"
#include "tumorseg/objectives.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

enum class Target { kOrgan, kTumor };

std::string to_string(Target t);
Target parse_target(const std::string& s);
/// Voxel labels forming the positive class of each network.
LabelSelector target_labels(Target t);

struct VolumePair {
  std::string volume;
  std::string mask;  // may be empty for inference-only inputs
};

struct TrainConfig {
  Target target = Target::kOrgan;
  int epochs = 30;
  int batch_size = 8;
  double base_lr = 1e-4;
  double encoder_lr_factor = 0.1;
  std::uint64_t seed = 0;
  int input_k = 1;
  int height = 64;  // crop_or_resize
  int width = 64;
  bool augment_enabled = true;
  AugmentConfig augment;
  LossConfig loss;
  WindowSpec window;
  NetworkConfig network;
  std::vector<VolumePair> train_volumes;
  std::vector<VolumePair> val_volumes;
  std::string output_dir = "runs";

  /// Network settings with in_channels and the LR factor filled in.
  NetworkConfig resolved_network() const;
  void validate() const;
};

struct InferenceConfig {
  double threshold = 0.5;
  int batch_size = 16;
  std::string organ_checkpoint;
  std::string tumor_checkpoint;
  std::vector<VolumePair> volumes;
  std::string output_dir = "predictions";
  bool suppress_outside_organ = true;

  void validate() const;
};

struct EvalPair {
  std::string volume_id;
  std::string prediction;
  std::string ground_truth;
};

struct EvaluateConfig {
  int min_area = 0;
  std::string organ_name = "organ";
  std::string tumor_name = "tumor";
  std::vector<EvalPair> pairs;
  std::string output = "metrics.csv";

  void validate() const;
};

/// The full run configuration: one JSON object with sections
/// train, network, augment, loss, window, inference and evaluate.
struct RunConfig {
  TrainConfig train;
  InferenceConfig inference;
  EvaluateConfig evaluate;
};

/// Parses a run config. Unknown keys and wrongly typed values are errors
/// naming the offending key. Relative volume paths resolve against
/// `base_dir` when given.
RunConfig parse_run_config(const nlohmann::json& j,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WindowSpec& w);
WindowSpec window_from_json(const nlohmann::json& j);

/// Hex digest over the settings that define a trained model: network,
/// target, input_k, input size, window and loss.
std::string config_hash(const TrainConfig& cfg);

}  // namespace tumorseg
