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

#include "tumorseg/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "tumorseg/error.hpp"
#include "tumorseg/rng.hpp"

namespace tumorseg {

using nlohmann::json;

std::string to_string(Target t) { return t == Target::kOrgan ? "organ" : "tumor"; }

Target parse_target(const std::string& s) {
  if (s == "organ") return Target::kOrgan;
  if (s == "tumor") return Target::kTumor;
  fail(ErrorCode::kConfig, "unknown target \"" + s + "\" (expected organ or tumor)");
}

LabelSelector target_labels(Target t) {
  return t == Target::kOrgan ? LabelSelector::organ() : LabelSelector::tumor();
}

NetworkConfig TrainConfig::resolved_network() const {
  NetworkConfig n = network;
  n.in_channels = input_k;
  n.encoder_lr_factor = encoder_lr_factor;
  return n;
}

void TrainConfig::validate() const {
  require(!train_volumes.empty(), ErrorCode::kConfig,
          "missing required key: train.train_volumes");
  require(epochs > 0, ErrorCode::kConfig, "empty schedule: train.epochs must be > 0");
  require(batch_size > 0, ErrorCode::kConfig, "train.batch_size must be > 0");
  require(base_lr > 0 && std::isfinite(base_lr), ErrorCode::kConfig,
          "train.base_lr must be > 0");
  require(encoder_lr_factor >= 0 && std::isfinite(encoder_lr_factor),
          ErrorCode::kConfig, "train.encoder_lr_factor must be >= 0");
  require(input_k >= 1 && input_k % 2 == 1, ErrorCode::kConfig,
          "train.input_k must be a positive odd integer");
  require(height >= 32 && width >= 32 && height % 32 == 0 && width % 32 == 0,
          ErrorCode::kConfig, "train.size must be divisible by 32");
  augment.validate();
  loss.validate();
  window.validate();
  resolved_network().validate();
  std::set<std::string> train_ids;
  for (const auto& v : train_volumes) {
    require(!v.volume.empty() && !v.mask.empty(), ErrorCode::kConfig,
            "train.train_volumes entries need volume and mask");
    train_ids.insert(v.volume);
  }
  for (const auto& v : val_volumes) {
    require(!v.volume.empty() && !v.mask.empty(), ErrorCode::kConfig,
            "train.val_volumes entries need volume and mask");
    require(!train_ids.contains(v.volume), ErrorCode::kConfig,
            "volume listed in both train and val: " + v.volume);
  }
}

void InferenceConfig::validate() const {
  require(threshold > 0 && threshold < 1, ErrorCode::kConfig,
          "inference.threshold must lie in (0, 1)");
  require(batch_size > 0, ErrorCode::kConfig, "inference.batch_size must be > 0");
}

void EvaluateConfig::validate() const {
  require(min_area >= 0, ErrorCode::kConfig, "evaluate.min_area must be >= 0");
}

namespace {

/// Reads typed keys from one JSON object and rejects anything unread.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j_.is_object(), ErrorCode::kConfig, "config section " + name_ +
                                                    " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kConfig, "invalid value for key: " + path(key));
    }
  }

  const json& child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      require(used_.contains(key), ErrorCode::kConfig, "unknown key: " + path(key));
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  const std::filesystem::path fp(p);
  return fp.is_absolute() ? p : (base / fp).lexically_normal().string();
}

std::vector<VolumePair> parse_pairs(const json& arr, const std::string& key,
                                    const std::filesystem::path& base,
                                    bool need_mask) {
  require(arr.is_array(), ErrorCode::kConfig, "key " + key + " must be a list");
  std::vector<VolumePair> out;
  for (const auto& e : arr) {
    VolumePair v;
    if (e.is_string()) {
      v.volume = e.get<std::string>();
    } else {
      Section s(e, key + "[]");
      s.get("volume", v.volume);
      s.get("mask", v.mask);
      s.finish();
    }
    require(!v.volume.empty(), ErrorCode::kConfig,
            "missing required key: " + key + "[].volume");
    require(!need_mask || !v.mask.empty(), ErrorCode::kConfig,
            "missing required key: " + key + "[].mask");
    v.volume = resolve(v.volume, base);
    v.mask = resolve(v.mask, base);
    out.push_back(v);
  }
  return out;
}

json pairs_to_json(const std::vector<VolumePair>& pairs) {
  json a = json::array();
  for (const auto& p : pairs) {
    json e{{"volume", p.volume}};
    if (!p.mask.empty()) e["mask"] = p.mask;
    a.push_back(e);
  }
  return a;
}

void parse_window(Section& s, WindowSpec& w) {
  std::string preset;
  s.get("preset", preset);
  if (preset == "liver") w = WindowSpec::liver();
  else if (preset == "kidney") w = WindowSpec::kidney();
  else require(preset.empty(), ErrorCode::kConfig, "unknown window preset: " + preset);
  s.get("hu_min", w.hu_min);
  s.get("hu_max", w.hu_max);
  s.finish();
}

}  // namespace

json to_json(const NetworkConfig& cfg) {
  return {{"in_channels", cfg.in_channels},
          {"out_classes", cfg.out_classes},
          {"pretrained_encoder", cfg.pretrained_encoder},
          {"pretrained_path", cfg.pretrained_path},
          {"encoder_lr_factor", cfg.encoder_lr_factor}};
}

NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  Section s(j, "network");
  s.get("in_channels", c.in_channels);
  s.get("out_classes", c.out_classes);
  s.get("pretrained_encoder", c.pretrained_encoder);
  s.get("pretrained_path", c.pretrained_path);
  s.get("encoder_lr_factor", c.encoder_lr_factor);
  s.finish();
  return c;
}

json to_json(const WindowSpec& w) { return {{"hu_min", w.hu_min}, {"hu_max", w.hu_max}}; }

WindowSpec window_from_json(const json& j) {
  WindowSpec w;
  Section s(j, "window");
  parse_window(s, w);
  return w;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig rc;
  Section root(j, "config");
  TrainConfig& t = rc.train;

  if (root.has("train")) {
    Section s(root.child("train"), "train");
    std::string target = to_string(t.target);
    s.get("target", target);
    t.target = parse_target(target);
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("base_lr", t.base_lr);
    s.get("encoder_lr_factor", t.encoder_lr_factor);
    s.get("seed", t.seed);
    s.get("input_k", t.input_k);
    if (s.has("size")) {
      std::vector<int> size;
      s.get("size", size);
      require(size.size() == 2, ErrorCode::kConfig, "train.size must be [H, W]");
      t.height = size[0];
      t.width = size[1];
    }
    s.get("augment", t.augment_enabled);
    s.get("output_dir", t.output_dir);
    t.output_dir = resolve(t.output_dir, base_dir);
    if (s.has("train_volumes"))
      t.train_volumes = parse_pairs(s.child("train_volumes"), "train.train_volumes",
                                    base_dir, true);
    if (s.has("val_volumes"))
      t.val_volumes = parse_pairs(s.child("val_volumes"), "train.val_volumes",
                                  base_dir, true);
    s.finish();
  }
  if (root.has("network")) {
    const NetworkConfig n = network_config_from_json(root.child("network"));
    if (root.child("network").contains("encoder_lr_factor")) {
      t.encoder_lr_factor = n.encoder_lr_factor;
    }
    t.network.pretrained_encoder = n.pretrained_encoder;
    t.network.pretrained_path = resolve(n.pretrained_path, base_dir);
    t.network.out_classes = n.out_classes;
  }
  if (root.has("augment")) {
    Section s(root.child("augment"), "augment");
    AugmentConfig& a = t.augment;
    s.get("elastic_alpha", a.elastic_alpha);
    s.get("elastic_sigma", a.elastic_sigma);
    s.get("max_shift", a.max_shift);
    s.get("scale_range", a.scale_range);
    s.get("max_rotate_deg", a.max_rotate_deg);
    s.get("probability", a.probability);
    s.finish();
  }
  if (root.has("loss")) {
    Section s(root.child("loss"), "loss");
    s.get("smooth", t.loss.smooth);
    s.get("clamp_eps", t.loss.clamp_eps);
    s.finish();
  }
  if (root.has("window")) {
    Section s(root.child("window"), "window");
    parse_window(s, t.window);
  }
  if (root.has("inference")) {
    Section s(root.child("inference"), "inference");
    InferenceConfig& i = rc.inference;
    s.get("threshold", i.threshold);
    s.get("batch_size", i.batch_size);
    s.get("organ_checkpoint", i.organ_checkpoint);
    s.get("tumor_checkpoint", i.tumor_checkpoint);
    s.get("output_dir", i.output_dir);
    s.get("suppress_outside_organ", i.suppress_outside_organ);
    if (s.has("volumes"))
      i.volumes = parse_pairs(s.child("volumes"), "inference.volumes", base_dir, false);
    s.finish();
    i.organ_checkpoint = resolve(i.organ_checkpoint, base_dir);
    i.tumor_checkpoint = resolve(i.tumor_checkpoint, base_dir);
    i.output_dir = resolve(i.output_dir, base_dir);
  }
  if (root.has("evaluate")) {
    Section s(root.child("evaluate"), "evaluate");
    EvaluateConfig& e = rc.evaluate;
    s.get("min_area", e.min_area);
    s.get("organ_name", e.organ_name);
    s.get("tumor_name", e.tumor_name);
    s.get("output", e.output);
    e.output = resolve(e.output, base_dir);
    if (s.has("pairs")) {
      const json& arr = s.child("pairs");
      require(arr.is_array(), ErrorCode::kConfig, "key evaluate.pairs must be a list");
      for (const auto& el : arr) {
        Section ps(el, "evaluate.pairs[]");
        EvalPair p;
        ps.get("volume_id", p.volume_id);
        ps.get("prediction", p.prediction);
        ps.get("ground_truth", p.ground_truth);
        ps.finish();
        require(!p.prediction.empty(), ErrorCode::kConfig,
                "missing required key: evaluate.pairs[].prediction");
        require(!p.ground_truth.empty(), ErrorCode::kConfig,
                "missing required key: evaluate.pairs[].ground_truth");
        p.prediction = resolve(p.prediction, base_dir);
        p.ground_truth = resolve(p.ground_truth, base_dir);
        e.pairs.push_back(p);
      }
    }
    s.finish();
  }
  root.finish();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "config is not valid JSON: " + path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

json to_json(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  const AugmentConfig& a = t.augment;
  const InferenceConfig& i = rc.inference;
  const EvaluateConfig& e = rc.evaluate;
  json pairs = json::array();
  for (const auto& p : e.pairs)
    pairs.push_back({{"volume_id", p.volume_id},
                     {"prediction", p.prediction},
                     {"ground_truth", p.ground_truth}});
  return {
      {"train",
       {{"target", to_string(t.target)},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"base_lr", t.base_lr},
        {"encoder_lr_factor", t.encoder_lr_factor},
        {"seed", t.seed},
        {"input_k", t.input_k},
        {"size", {t.height, t.width}},
        {"augment", t.augment_enabled},
        {"output_dir", t.output_dir},
        {"train_volumes", pairs_to_json(t.train_volumes)},
        {"val_volumes", pairs_to_json(t.val_volumes)}}},
      {"network",
       {{"out_classes", t.network.out_classes},
        {"pretrained_encoder", t.network.pretrained_encoder},
        {"pretrained_path", t.network.pretrained_path}}},
      {"augment",
       {{"elastic_alpha", a.elastic_alpha},
        {"elastic_sigma", a.elastic_sigma},
        {"max_shift", a.max_shift},
        {"scale_range", a.scale_range},
        {"max_rotate_deg", a.max_rotate_deg},
        {"probability", a.probability}}},
      {"loss", {{"smooth", t.loss.smooth}, {"clamp_eps", t.loss.clamp_eps}}},
      {"window", to_json(t.window)},
      {"inference",
       {{"threshold", i.threshold},
        {"batch_size", i.batch_size},
        {"organ_checkpoint", i.organ_checkpoint},
        {"tumor_checkpoint", i.tumor_checkpoint},
        {"output_dir", i.output_dir},
        {"suppress_outside_organ", i.suppress_outside_organ},
        {"volumes", pairs_to_json(i.volumes)}}},
      {"evaluate",
       {{"min_area", e.min_area},
        {"organ_name", e.organ_name},
        {"tumor_name", e.tumor_name},
        {"output", e.output},
        {"pairs", pairs}}},
  };
}

std::string config_hash(const TrainConfig& cfg) {
  const NetworkConfig n = cfg.resolved_network();
  const json j{{"network", {{"in_channels", n.in_channels},
                            {"out_classes", n.out_classes},
                            {"pretrained_encoder", n.pretrained_encoder},
                            {"encoder_lr_factor", n.encoder_lr_factor}}},
               {"target", to_string(cfg.target)},
               {"input_k", cfg.input_k},
               {"size", {cfg.height, cfg.width}},
               {"window", to_json(cfg.window)},
               {"loss", {{"smooth", cfg.loss.smooth}, {"clamp_eps", cfg.loss.clamp_eps}}}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace tumorseg
