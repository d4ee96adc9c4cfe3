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

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumorseg/checkpoint.hpp"
#include "tumorseg/config.hpp"
#include "tumorseg/network.hpp"
#include "tumorseg/optimizer.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg {

struct Dataset {
  std::vector<SliceSample> train;
  std::vector<SliceSample> val;
};

/// Samples of one volume for `cfg`: windowed, stacked to input_k channels,
/// binarized on the target labels and resized to the training size. The
/// tumor target keeps only slices whose center contains organ or tumor.
std::vector<SliceSample> volume_samples(const CTVolume& volume,
                                        const MaskVolume& mask,
                                        const TrainConfig& cfg);

/// Loads every listed volume in order. Throws when the training split is
/// empty or a volume identifier appears in both splits.
Dataset build_dataset(const TrainConfig& cfg);

/// Packs samples into a (k, n, H, W) tensor; `targets`, when given,
/// receives the masks as 0/1 floats in the same pixel order as the output.
Tensor make_batch(const std::vector<const SliceSample*>& samples,
                  std::vector<float>* targets = nullptr);

struct EvalStats {
  double loss = 0;       // mean per-sample composite loss
  double soft_dice = 0;  // mean per-sample soft Dice
};

/// Network plus optimizer for one training stream.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  /// One Adam update on `batch`; returns the batch loss before the update.
  LossTerms step(const std::vector<const SliceSample*>& batch);

  /// Shuffles, augments and trains for one epoch (1-based index). Throws if
  /// a sample from `forbidden_ids` reaches a batch or the loss turns
  /// non-finite. Returns the mean batch loss.
  double train_epoch(const std::vector<SliceSample>& train, int epoch,
                     const std::set<std::string>& forbidden_ids = {});

  /// Evaluation-mode loss and soft Dice; no state changes.
  EvalStats evaluate(const std::vector<SliceSample>& samples,
                     int batch_size = 16) const;

  /// Order in which `epoch` visits a training set of size n.
  std::vector<std::size_t> epoch_order(std::size_t n, int epoch) const;

  SegNetwork& net() { return net_; }
  const SegNetwork& net() const { return net_; }
  Adam& optimizer() { return adam_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  SegNetwork net_;
  Adam adam_;
};

struct TrainOptions {
  /// Written verbatim as config.json in the run directory; defaults to the
  /// serialized TrainConfig.
  nlohmann::json resolved_config;
  /// Explicit run directory; otherwise <output_dir>/<target>-<hash>-<time>.
  std::filesystem::path run_dir;
  std::function<void(const EpochRecord&)> on_epoch;
  bool log = true;
};

struct TrainResult {
  std::filesystem::path run_dir;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  TrainHistory history;
};

TrainResult run_training(const TrainConfig& cfg, const TrainOptions& opts = {});

/// Continues the run saved at `checkpoint` for cfg.epochs more epochs.
TrainResult resume(const std::filesystem::path& checkpoint, const TrainConfig& cfg,
                   const TrainOptions& opts = {});

struct OverfitResult {
  int steps = 0;
  double loss = 0;
  double soft_dice = 0;
};

/// Repeated updates on a single sample, then a training-mode loss readout.
OverfitResult overfit_sample(const SliceSample& sample, const TrainConfig& cfg,
                             int steps);

}  // namespace tumorseg
