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

#include "tumorseg/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include "tumorseg/augment.hpp"
#include "tumorseg/error.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/objectives.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

namespace fs = std::filesystem;

std::vector<SliceSample> volume_samples(const CTVolume& volume, const MaskVolume& mask,
                                        const TrainConfig& cfg) {
  const WindowedVolume wv = window_hu(volume, cfg.window);
  std::vector<SliceSample> raw =
      extract_slices(wv, mask, target_labels(cfg.target), cfg.input_k);
  const LabelSelector organ = LabelSelector::organ();
  std::vector<SliceSample> out;
  out.reserve(raw.size());
  for (SliceSample& s : raw) {
    if (cfg.target == Target::kTumor) {
      const std::size_t plane = mask.shape.plane_size();
      const auto* labels = mask.labels.data() + plane * static_cast<std::size_t>(s.slice_index);
      bool has_organ = false;
      for (std::size_t i = 0; i < plane && !has_organ; ++i) has_organ = organ.contains(labels[i]);
      if (!has_organ) continue;
    }
    if (s.height != cfg.height || s.width != cfg.width) {
      out.push_back(resize_sample(s, cfg.height, cfg.width));
    } else {
      out.push_back(std::move(s));
    }
  }
  return out;
}

Dataset build_dataset(const TrainConfig& cfg) {
  cfg.validate();
  Dataset d;
  std::set<std::string> train_ids;
  auto load = [&](const VolumePair& p, std::vector<SliceSample>& dst,
                  std::set<std::string>* ids, const std::set<std::string>* disallowed) {
    const CTVolume v = load_volume(p.volume);
    const MaskVolume m = load_mask(p.mask, v.shape);
    require(!disallowed || !disallowed->contains(v.identifier), ErrorCode::kConfig,
            "volume " + v.identifier + " appears in both train and val splits");
    if (ids) ids->insert(v.identifier);
    auto samples = volume_samples(v, m, cfg);
    for (auto& s : samples) dst.push_back(std::move(s));
  };
  for (const auto& p : cfg.train_volumes) load(p, d.train, &train_ids, nullptr);
  for (const auto& p : cfg.val_volumes) load(p, d.val, nullptr, &train_ids);
  require(!d.train.empty(), ErrorCode::kInvalidArgument, "empty training set");
  return d;
}

Tensor make_batch(const std::vector<const SliceSample*>& samples,
                  std::vector<float>* targets) {
  require(!samples.empty(), ErrorCode::kInvalidArgument, "empty batch");
  const SliceSample& first = *samples.front();
  const int k = first.channels;
  const int h = first.height;
  const int w = first.width;
  const int n = static_cast<int>(samples.size());
  Tensor t(k, n, h, w);
  const std::size_t plane = first.plane_size();
  if (targets) targets->assign(static_cast<std::size_t>(n) * plane, 0.0f);
  for (int i = 0; i < n; ++i) {
    const SliceSample& s = *samples[static_cast<std::size_t>(i)];
    require(s.channels == k && s.height == h && s.width == w, ErrorCode::kShapeMismatch,
            "batch samples differ in shape");
    for (int c = 0; c < k; ++c) {
      std::copy_n(s.image.data() + static_cast<std::size_t>(c) * plane, plane,
                  t.data.data() + (static_cast<std::size_t>(c) * n + i) * plane);
    }
    if (targets) {
      require(s.mask.size() == plane, ErrorCode::kShapeMismatch, "sample without mask");
      float* dst = targets->data() + static_cast<std::size_t>(i) * plane;
      for (std::size_t j = 0; j < plane; ++j) dst[j] = s.mask[j] ? 1.0f : 0.0f;
    }
  }
  return t;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      net_(build_network(cfg.resolved_network(), derive_seed(cfg.seed, "init"))),
      adam_(parameter_groups(net_, cfg.base_lr, cfg.resolved_network())) {}

LossTerms Trainer::step(const std::vector<const SliceSample*>& batch) {
  std::vector<float> y;
  const Tensor x = make_batch(batch, &y);
  net_.store().zero_grad();
  const Tensor p = net_.forward(x);
  Tensor d(p.c, p.n, p.h, p.w);
  const LossTerms terms = composite_loss_logit_grad<float>(y, p.data, cfg_.loss, d.data);
  require(std::isfinite(terms.total), ErrorCode::kNumerical,
          "non-finite loss (bce=" + std::to_string(terms.bce) +
              ", dice=" + std::to_string(terms.dice) + ")");
  net_.backward(d);
  adam_.step();
  return terms;
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t n, int epoch) const {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::uint64_t state = derive_seed(cfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    state = splitmix64(state);
    const std::size_t j = static_cast<std::size_t>(state % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

double Trainer::train_epoch(const std::vector<SliceSample>& train, int epoch,
                            const std::set<std::string>& forbidden_ids) {
  require(!train.empty(), ErrorCode::kInvalidArgument, "empty training set");
  const auto order = epoch_order(train.size(), epoch);
  const std::uint64_t aug_seed =
      derive_seed(cfg_.seed, "augment", static_cast<std::uint64_t>(epoch));
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  double sum = 0;
  int batches = 0;
  std::vector<SliceSample> augmented;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    std::vector<const SliceSample*> batch;
    augmented.clear();
    augmented.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const SliceSample& s = train[order[i]];
      require(!forbidden_ids.contains(s.volume_id), ErrorCode::kInvalidArgument,
              "validation volume " + s.volume_id + " reached a training batch");
      if (cfg_.augment_enabled) {
        augmented.push_back(apply_pipeline(s, cfg_.augment, aug_seed).sample);
        batch.push_back(&augmented.back());
      } else {
        batch.push_back(&s);
      }
    }
    const LossTerms t = step(batch);
    sum += t.total;
    ++batches;
  }
  return sum / batches;
}

EvalStats Trainer::evaluate(const std::vector<SliceSample>& samples, int batch_size) const {
  EvalStats st;
  if (samples.empty()) return st;
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  double loss = 0, dice = 0;
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    const std::size_t end = std::min(samples.size(), start + bs);
    std::vector<const SliceSample*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    std::vector<float> y;
    const Tensor x = make_batch(batch, &y);
    const Tensor p = net_.predict(x);
    const std::size_t plane = p.plane();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::span<const float> ys(y.data() + i * plane, plane);
      const std::span<const float> ps(p.data.data() + i * plane, plane);
      const LossTerms t = composite_loss_terms(ys, ps, cfg_.loss);
      loss += t.total;
      dice += t.dice;
    }
  }
  st.loss = loss / static_cast<double>(samples.size());
  st.soft_dice = dice / static_cast<double>(samples.size());
  return st;
}

namespace {

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path fresh_run_dir(const TrainConfig& cfg) {
  const std::string base =
      to_string(cfg.target) + "-" + config_hash(cfg) + "-" + timestamp();
  fs::path dir = fs::path(cfg.output_dir) / base;
  for (int i = 1; fs::exists(dir); ++i)
    dir = fs::path(cfg.output_dir) / (base + "-" + std::to_string(i));
  return dir;
}

nlohmann::json default_resolved(const TrainConfig& cfg) {
  RunConfig rc;
  rc.train = cfg;
  return to_json(rc);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

CheckpointMeta base_meta(const TrainConfig& cfg) {
  CheckpointMeta m;
  m.network = cfg.resolved_network();
  m.target = cfg.target;
  m.config_hash = config_hash(cfg);
  m.input_k = cfg.input_k;
  m.height = cfg.height;
  m.width = cfg.width;
  m.window = cfg.window;
  m.base_lr = cfg.base_lr;
  m.seed = cfg.seed;
  return m;
}

TrainResult run_epochs(Trainer& trainer, const Dataset& data, const fs::path& run_dir,
                       CheckpointMeta meta, int epochs, const TrainOptions& opts) {
  TrainResult result;
  result.run_dir = run_dir;
  result.best_checkpoint = run_dir / "best.ckpt";
  result.last_checkpoint = run_dir / "last.ckpt";
  std::set<std::string> val_ids;
  for (const auto& s : data.val) val_ids.insert(s.volume_id);
  const bool has_val = !data.val.empty();
  bool have_best = fs::exists(result.best_checkpoint);
  for (int e = 0; e < epochs; ++e) {
    const int epoch = meta.epoch + 1;
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = trainer.train_epoch(data.train, epoch, val_ids);
    const EvalStats v = trainer.evaluate(has_val ? data.val : data.train);
    r.val_loss = v.loss;
    r.val_soft_dice = v.soft_dice;
    require(std::isfinite(r.val_loss), ErrorCode::kNumerical,
            "non-finite validation loss at epoch " + std::to_string(epoch));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    meta.epoch = epoch;
    meta.history.append(r);
    if (!have_best || r.val_loss < meta.best_val_loss) {
      meta.best_val_loss = r.val_loss;
      save_checkpoint(result.best_checkpoint, trainer.net(), nullptr, meta);
      have_best = true;
    }
    save_checkpoint(result.last_checkpoint, trainer.net(), &trainer.optimizer(), meta);
    meta.history.write_csv(run_dir / "history.csv");
    if (opts.log) {
      std::fprintf(stderr,
                   "[%s] epoch %d train_loss %.4f val_loss %.4f val_soft_dice %.4f (%.1fs)\n",
                   to_string(meta.target).c_str(), epoch, r.train_loss, r.val_loss,
                   r.val_soft_dice, r.seconds);
    }
    if (opts.on_epoch) opts.on_epoch(r);
  }
  result.history = meta.history;
  return result;
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const Dataset data = build_dataset(cfg);
  const fs::path run_dir = opts.run_dir.empty() ? fresh_run_dir(cfg) : opts.run_dir;
  fs::create_directories(run_dir);
  const nlohmann::json resolved =
      opts.resolved_config.is_null() ? default_resolved(cfg) : opts.resolved_config;
  write_text(run_dir / "config.json", resolved.dump(2) + "\n");
  if (opts.log) {
    std::fprintf(stderr, "[%s] run %s: %zu train / %zu val samples\n",
                 to_string(cfg.target).c_str(), run_dir.string().c_str(),
                 data.train.size(), data.val.size());
  }
  Trainer trainer(cfg);
  return run_epochs(trainer, data, run_dir, base_meta(cfg), cfg.epochs, opts);
}

TrainResult resume(const fs::path& checkpoint, const TrainConfig& cfg,
                   const TrainOptions& opts) {
  cfg.validate();
  const CheckpointMeta stored = read_checkpoint_meta(checkpoint);
  require(stored.network.architecture_equals(cfg.resolved_network()), ErrorCode::kConfig,
          "checkpoint network config mismatch: stored in_channels=" +
              std::to_string(stored.network.in_channels) + ", requested " +
              std::to_string(cfg.input_k));
  require(stored.config_hash == config_hash(cfg), ErrorCode::kConfig,
          "config hash mismatch: checkpoint " + stored.config_hash + ", config " +
              config_hash(cfg));
  TrainConfig fresh = cfg;
  fresh.network.pretrained_encoder = false;
  Trainer trainer(fresh);
  CheckpointMeta meta = load_checkpoint_into(checkpoint, trainer.net(), &trainer.optimizer());
  const Dataset data = build_dataset(cfg);
  const fs::path run_dir = opts.run_dir.empty() ? checkpoint.parent_path() : opts.run_dir;
  fs::create_directories(run_dir);
  if (!opts.resolved_config.is_null())
    write_text(run_dir / "config.json", opts.resolved_config.dump(2) + "\n");
  return run_epochs(trainer, data, run_dir, meta, cfg.epochs, opts);
}

OverfitResult overfit_sample(const SliceSample& sample, const TrainConfig& cfg, int steps) {
  require(steps > 0, ErrorCode::kInvalidArgument, "empty schedule");
  TrainConfig c = cfg;
  c.augment_enabled = false;
  Trainer trainer(c);
  const std::vector<const SliceSample*> batch{&sample};
  for (int i = 0; i < steps; ++i) trainer.step(batch);
  std::vector<float> y;
  const Tensor p = trainer.net().forward(make_batch(batch, &y));
  const LossTerms t = composite_loss_terms<float>(y, p.data, c.loss);
  return {steps, t.total, t.dice};
}

}  // namespace tumorseg
