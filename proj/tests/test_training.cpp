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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "test_util.hpp"
#include "tumorseg/checkpoint.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/optimizer.hpp"
#include "tumorseg/training.hpp"

namespace tumorseg {
namespace {

using testing::small_train_config;
using testing::TempDir;
using testing::thrown_code;
using testing::write_phantoms;

class TrainingTest : public ::testing::Test {
 protected:
  void SetUp() override {
    volumes_ = write_phantoms(dir_.path() / "data", 3);
    cfg_ = small_train_config({volumes_[0], volumes_[1]}, {volumes_[2]}, dir_ / "runs");
  }
  TrainOptions quiet(const std::string& run = {}) const {
    TrainOptions o;
    o.log = false;
    if (!run.empty()) o.run_dir = dir_ / run;
    return o;
  }

  TempDir dir_{"train"};
  std::vector<VolumePair> volumes_;
  TrainConfig cfg_;
};

TEST_F(TrainingTest, DatasetHasOneSamplePerSlice) {
  const auto d = build_dataset(cfg_);
  EXPECT_EQ(d.train.size(), 32u);
  EXPECT_EQ(d.val.size(), 16u);
  for (const auto& s : d.train) {
    EXPECT_EQ(s.height, 32);
    EXPECT_EQ(s.channels, 1);
    EXPECT_NE(s.volume_id, "ph_002");
  }
}

TEST_F(TrainingTest, TumorTargetKeepsOrganSlicesOnly) {
  cfg_.target = Target::kTumor;
  const auto v = load_volume(volumes_[0].volume);
  const auto m = load_mask(volumes_[0].mask, v.shape);
  const auto samples = volume_samples(v, m, cfg_);
  int organ_slices = 0;
  for (int z = 0; z < m.shape.depth; ++z) {
    bool any = false;
    for (std::size_t i = 0; i < m.shape.plane_size(); ++i)
      any = any || m.labels[z * m.shape.plane_size() + i] != 0;
    organ_slices += any;
  }
  EXPECT_EQ(static_cast<int>(samples.size()), organ_slices);
  EXPECT_LT(organ_slices, 16);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.mask.size(); ++i)
      EXPECT_EQ(s.mask[i], m.labels[s.slice_index * m.shape.plane_size() + i] == 2);
  }
}

TEST_F(TrainingTest, ValidationSamplesAreUnaugmented) {
  cfg_.augment_enabled = true;
  cfg_.augment.probability = 1.0;
  const auto d = build_dataset(cfg_);
  const auto v = load_volume(volumes_[2].volume);
  const auto m = load_mask(volumes_[2].mask, v.shape);
  const auto direct = volume_samples(v, m, cfg_);
  ASSERT_EQ(d.val.size(), direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_EQ(d.val[i].image, direct[i].image);
    EXPECT_EQ(d.val[i].mask, direct[i].mask);
  }
  Trainer t(cfg_);
  const auto a = t.evaluate(d.val);
  const auto b = t.evaluate(d.val, 3);
  EXPECT_NEAR(a.loss, b.loss, 1e-6);
  EXPECT_EQ(t.evaluate(d.val).loss, a.loss);
}

TEST_F(TrainingTest, SplitOverlapRejected) {
  cfg_.val_volumes = {volumes_[0]};
  EXPECT_EQ(thrown_code([&] { build_dataset(cfg_); }), ErrorCode::kConfig);
}

TEST_F(TrainingTest, EmptyScheduleRejected) {
  cfg_.epochs = 0;
  std::string msg;
  EXPECT_EQ(thrown_code([&] { run_training(cfg_, quiet()); }, &msg), ErrorCode::kConfig);
  EXPECT_NE(msg.find("empty schedule"), std::string::npos);
}

TEST_F(TrainingTest, EpochOrderIsSeededPermutation) {
  Trainer a(cfg_);
  Trainer b(cfg_);
  const auto o1 = a.epoch_order(50, 1);
  EXPECT_EQ(o1, b.epoch_order(50, 1));
  EXPECT_NE(o1, a.epoch_order(50, 2));
  std::set<std::size_t> seen(o1.begin(), o1.end());
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(*seen.rbegin(), 49u);
}

TEST_F(TrainingTest, ForbiddenVolumeInBatchThrows) {
  const auto d = build_dataset(cfg_);
  Trainer t(cfg_);
  EXPECT_EQ(thrown_code([&] { t.train_epoch(d.train, 1, {"ph_001"}); }),
            ErrorCode::kInvalidArgument);
}

TEST_F(TrainingTest, NonFiniteLossThrows) {
  const auto d = build_dataset(cfg_);
  Trainer t(cfg_);
  auto* b = t.net().store().find("finalconv3.bias");
  b->value[0] = std::nanf("");
  EXPECT_EQ(thrown_code([&] { t.train_epoch(d.train, 1); }), ErrorCode::kNumerical);
}

TEST_F(TrainingTest, RunIsDeterministic) {
  const auto a = run_training(cfg_, quiet("a"));
  const auto b = run_training(cfg_, quiet("b"));
  ASSERT_EQ(a.history.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.history.records()[i].train_loss, b.history.records()[i].train_loss);
    EXPECT_EQ(a.history.records()[i].val_loss, b.history.records()[i].val_loss);
  }
  const auto ma = load_model(a.last_checkpoint);
  const auto mb = load_model(b.last_checkpoint);
  for (std::size_t i = 0; i < ma.net.store().parameters().size(); ++i)
    ASSERT_EQ(ma.net.store().parameters()[i]->value, mb.net.store().parameters()[i]->value);
  EXPECT_TRUE(std::filesystem::exists(a.run_dir / "history.csv"));
  EXPECT_TRUE(std::filesystem::exists(a.run_dir / "config.json"));
}

TEST_F(TrainingTest, ResumeContinuesHistoryExactly) {
  const auto first = run_training(cfg_, quiet("split"));
  const auto cont = resume(first.last_checkpoint, cfg_, quiet());
  ASSERT_EQ(cont.history.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(cont.history.records()[i].epoch, i + 1);

  cfg_.epochs = 4;
  const auto straight = run_training(cfg_, quiet("straight"));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(cont.history.records()[i].train_loss, straight.history.records()[i].train_loss,
                1e-6);
    EXPECT_NEAR(cont.history.records()[i].val_loss, straight.history.records()[i].val_loss,
                1e-6);
  }
  std::ifstream csv(cont.run_dir / "history.csv");
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,train_loss,val_loss,val_soft_dice,seconds");
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST_F(TrainingTest, ResumeRejectsIncompatibleConfig) {
  const auto r = run_training(cfg_, quiet("base"));
  TrainConfig k3 = cfg_;
  k3.input_k = 3;
  std::string msg;
  EXPECT_EQ(thrown_code([&] { resume(r.last_checkpoint, k3, quiet()); }, &msg),
            ErrorCode::kConfig);
  EXPECT_NE(msg.find("in_channels"), std::string::npos);
  TrainConfig other = cfg_;
  other.window = WindowSpec::kidney();
  EXPECT_EQ(thrown_code([&] { resume(r.last_checkpoint, other, quiet()); }), ErrorCode::kConfig);
  TrainConfig longer = cfg_;
  longer.epochs = 1;
  EXPECT_EQ(resume(r.last_checkpoint, longer, quiet()).history.size(), 3u);
}

TEST_F(TrainingTest, BestCheckpointReproducesValidationLoss) {
  const auto r = run_training(cfg_, quiet("best"));
  const auto model = load_model(r.best_checkpoint);
  double best = INFINITY;
  for (const auto& e : r.history.records()) best = std::min(best, e.val_loss);
  EXPECT_DOUBLE_EQ(model.meta.best_val_loss, best);
  Trainer t(cfg_);
  load_checkpoint_into(r.best_checkpoint, t.net(), nullptr);
  const auto d = build_dataset(cfg_);
  EXPECT_NEAR(t.evaluate(d.val).loss, best, 1e-6);
}

TEST_F(TrainingTest, CheckpointRoundTripIsBitExact) {
  Trainer t(cfg_);
  const auto d = build_dataset(cfg_);
  t.train_epoch(d.train, 1);
  CheckpointMeta meta;
  meta.network = cfg_.resolved_network();
  meta.epoch = 1;
  meta.config_hash = config_hash(cfg_);
  meta.height = 32;
  meta.width = 32;
  const auto path = dir_ / "x.ckpt";
  save_checkpoint(path, t.net(), &t.optimizer(), meta);

  Trainer u(cfg_);
  const auto back = load_checkpoint_into(path, u.net(), &u.optimizer());
  EXPECT_EQ(back.epoch, 1);
  EXPECT_EQ(back.config_hash, meta.config_hash);
  EXPECT_EQ(u.optimizer().step_count(), t.optimizer().step_count());
  const auto& pa = t.net().store().parameters();
  const auto& pb = u.net().store().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) ASSERT_EQ(pa[i]->value, pb[i]->value);
  for (std::size_t i = 0; i < t.optimizer().slots().size(); ++i) {
    ASSERT_EQ(t.optimizer().slots()[i].m, u.optimizer().slots()[i].m);
    ASSERT_EQ(t.optimizer().slots()[i].v, u.optimizer().slots()[i].v);
  }
  const auto& ba = t.net().store().buffers();
  const auto& bb = u.net().store().buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) ASSERT_EQ(ba[i]->value, bb[i]->value);
}

TEST_F(TrainingTest, CorruptCheckpointRejected) {
  const auto path = dir_ / "bad.ckpt";
  std::ofstream(path) << "garbage bytes";
  EXPECT_EQ(thrown_code([&] { load_model(path); }), ErrorCode::kFormat);
  EXPECT_EQ(thrown_code([&] { load_model(dir_ / "missing.ckpt"); }), ErrorCode::kMissingFile);
}

TEST_F(TrainingTest, LoadModelRejectsArchitectureMismatch) {
  Trainer t(cfg_);
  CheckpointMeta meta;
  meta.network = cfg_.resolved_network();
  const auto path = dir_ / "m.ckpt";
  save_checkpoint(path, t.net(), nullptr, meta);
  NetworkConfig other = meta.network;
  other.in_channels = 3;
  std::string msg;
  EXPECT_EQ(thrown_code([&] { load_model(path, &other); }, &msg), ErrorCode::kConfig);
  EXPECT_NE(msg.find("mismatch"), std::string::npos);
  Trainer u(cfg_);
  EXPECT_EQ(thrown_code([&] { load_checkpoint_into(path, u.net(), &u.optimizer()); }),
            ErrorCode::kFormat);
}

TEST_F(TrainingTest, OverfitsSingleSample) {
  const auto d = build_dataset(cfg_);
  const SliceSample* s = nullptr;
  for (const auto& x : d.train)
    if (std::count(x.mask.begin(), x.mask.end(), 1) > 50) s = &x;
  ASSERT_NE(s, nullptr);
  const auto r = overfit_sample(*s, cfg_, 40);
  EXPECT_EQ(r.steps, 40);
  EXPECT_LT(r.loss, 0.2);
  EXPECT_GT(r.soft_dice, 0.9);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p;
  p.name = "w";
  p.shape = {3};
  p.value = {1.0f, 2.0f, 3.0f};
  p.grad = {0.5f, -2.0f, 0.0f};
  ParameterGroups g;
  g.encoder.lr = 0.01;
  g.decoder.lr = 0.1;
  g.decoder.params = {&p};
  Adam adam(g);
  adam.step();
  EXPECT_NEAR(p.value[0], 1.0f - 0.1f, 1e-6);
  EXPECT_NEAR(p.value[1], 2.0f + 0.1f, 1e-6);
  EXPECT_EQ(p.value[2], 3.0f);
  EXPECT_EQ(adam.step_count(), 1);
  // Second step with the same gradient: corrected moments keep the ratio at 1.
  p.grad = {0.5f, -2.0f, 0.0f};
  adam.step();
  EXPECT_NEAR(p.value[0], 1.0f - 0.2f, 1e-5);
}

TEST(History, RequiresIncreasingEpochs) {
  TrainHistory h;
  h.append({1, 0.5, 0.4, 0.6, 1.0});
  EXPECT_THROW(h.append({1, 0.5, 0.4, 0.6, 1.0}), Error);
  h.append({3, 0.5, 0.4, 0.6, 1.0});
  EXPECT_EQ(h.size(), 2u);
}

}  // namespace
}  // namespace tumorseg
