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

#include "tumorseg/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "tumorseg/checkpoint.hpp"
#include "tumorseg/config.hpp"
#include "tumorseg/error.hpp"
#include "tumorseg/inference.hpp"
#include "tumorseg/metrics.hpp"
#include "tumorseg/nifti.hpp"
#include "tumorseg/phantom.hpp"
#include "tumorseg/report.hpp"
#include "tumorseg/rng.hpp"
#include "tumorseg/training.hpp"

namespace tumorseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown subcommand or flag)\n"
    "  3  invalid config (missing or malformed key)\n"
    "  4  missing input file\n"
    "  5  unreadable or malformed data (NIfTI, checkpoint, CSV)\n"
    "  6  numerical failure (non-finite loss)\n"
    "  7  invalid argument or shape mismatch\n"
    "  8  resource unavailable (e.g. pretrained weights)\n";

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kConfig: return kBadConfig;
    case ErrorCode::kMissingFile: return kMissingInput;
    case ErrorCode::kIo:
    case ErrorCode::kFormat:
    case ErrorCode::kDimensionality:
    case ErrorCode::kNonFinite: return kBadData;
    case ErrorCode::kNumerical: return kNumericalFailure;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kUndefinedMetric: return kBadArgument;
    case ErrorCode::kUnavailable: return kNotAvailable;
  }
  return kInternal;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> min_area;
  std::optional<double> threshold;
  std::optional<std::string> target;
  std::optional<std::string> out;
};

RunConfig load_config(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) rc.train.seed = *c.seed;
  if (c.min_area) rc.evaluate.min_area = *c.min_area;
  if (c.threshold) rc.inference.threshold = *c.threshold;
  if (c.target) rc.train.target = parse_target(*c.target);
  return rc;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

// phantom-gen ---------------------------------------------------------------

struct PhantomArgs {
  int count = 1;
  int depth = 32, height = 64, width = 64;
  double noise = 10.0;
  int n_tumors = 2;
  double radius_min = 3.0, radius_max = 5.0;
  std::string prefix = "phantom";
  int first_index = 0;
};

int cmd_phantom_gen(const Common& c, const PhantomArgs& a, std::ostream& out) {
  const fs::path dir = c.out.value_or("phantoms");
  fs::create_directories(dir);
  const std::uint64_t seed = c.seed.value_or(0);
  json entries = json::array();
  PhantomSpec base;
  base.shape = {a.depth, a.height, a.width};
  base.noise_sigma = a.noise;
  base.n_tumors = a.n_tumors;
  base.tumor_radius_range = {a.radius_min, a.radius_max};
  require(a.count >= 1, ErrorCode::kInvalidArgument, "--count must be >= 1");
  for (int i = 0; i < a.count; ++i) {
    PhantomSpec spec = base;
    const int index = a.first_index + i;
    spec.seed = derive_seed(seed, "phantom", static_cast<std::uint64_t>(index));
    char id[64];
    std::snprintf(id, sizeof id, "%s_%03d", a.prefix.c_str(), index);
    spec.identifier = id;
    const Phantom ph = generate_phantom(spec);
    const PhantomFiles files = write_phantom(ph.volume, ph.mask, dir);
    entries.push_back({{"id", spec.identifier},
                       {"volume", fs::absolute(files.volume).string()},
                       {"mask", fs::absolute(files.mask).string()},
                       {"seed", spec.seed}});
  }
  const json manifest{
      {"spec",
       {{"shape", {base.shape.depth, base.shape.height, base.shape.width}},
        {"spacing", base.spacing},
        {"organ_hu", base.organ_hu},
        {"tumor_hu", base.tumor_hu},
        {"background_hu", base.background_hu},
        {"noise_sigma", base.noise_sigma},
        {"n_tumors", base.n_tumors},
        {"tumor_radius_range", base.tumor_radius_range},
        {"seed", seed}}},
      {"phantoms", entries}};
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << a.count << " phantoms to " << dir.string() << '\n';
  return kOk;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::optional<double> base_lr;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::string resume;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  require(!c.config.empty(), ErrorCode::kConfig, "train needs --config");
  RunConfig rc = load_config(c);
  if (a.base_lr) rc.train.base_lr = *a.base_lr;
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (a.batch_size) rc.train.batch_size = *a.batch_size;
  if (c.out) rc.train.output_dir = *c.out;
  rc.train.validate();
  TrainOptions opts;
  opts.resolved_config = to_json(rc);
  const TrainResult r = a.resume.empty() ? run_training(rc.train, opts)
                                         : resume(a.resume, rc.train, opts);
  const json summary{{"target", to_string(rc.train.target)},
                     {"run_dir", fs::absolute(r.run_dir).string()},
                     {"best_checkpoint", fs::absolute(r.best_checkpoint).string()},
                     {"last_checkpoint", fs::absolute(r.last_checkpoint).string()},
                     {"epochs", r.history.size()},
                     {"final_val_loss", r.history.records().back().val_loss},
                     {"final_val_soft_dice", r.history.records().back().val_soft_dice}};
  write_json(fs::path(rc.train.output_dir) / ("train_" + to_string(rc.train.target) + ".json"),
             summary);
  out << summary.dump() << '\n';
  return kOk;
}

// predict -------------------------------------------------------------------

struct PredictArgs {
  std::string organ_checkpoint;
  std::string tumor_checkpoint;
  std::vector<std::string> volumes;
  bool probabilities = false;
};

int cmd_predict(const Common& c, const PredictArgs& a, std::ostream& out) {
  RunConfig rc = load_config(c);
  InferenceConfig& ic = rc.inference;
  if (!a.organ_checkpoint.empty()) ic.organ_checkpoint = a.organ_checkpoint;
  if (!a.tumor_checkpoint.empty()) ic.tumor_checkpoint = a.tumor_checkpoint;
  if (c.out) ic.output_dir = *c.out;
  ic.validate();
  std::vector<VolumePair> volumes = ic.volumes;
  if (!a.volumes.empty()) {
    volumes.clear();
    for (const auto& v : a.volumes) volumes.push_back({v, ""});
  }
  if (volumes.empty()) volumes = rc.train.val_volumes;
  require(!volumes.empty(), ErrorCode::kConfig, "missing required key: inference.volumes");
  require(!ic.organ_checkpoint.empty() || !ic.tumor_checkpoint.empty(), ErrorCode::kConfig,
          "missing required key: inference.organ_checkpoint");
  std::optional<LoadedModel> organ, tumor;
  if (!ic.organ_checkpoint.empty()) organ = load_model(ic.organ_checkpoint);
  if (!ic.tumor_checkpoint.empty()) tumor = load_model(ic.tumor_checkpoint);
  require(!organ || organ->meta.target == Target::kOrgan, ErrorCode::kConfig,
          "organ checkpoint was trained for target " + to_string(organ ? organ->meta.target : Target::kOrgan));
  require(!tumor || tumor->meta.target == Target::kTumor, ErrorCode::kConfig,
          "tumor checkpoint was trained for target organ");
  const fs::path dir = ic.output_dir;
  fs::create_directories(dir);
  json entries = json::array();
  for (const auto& v : volumes) {
    const CTVolume vol = load_volume(v.volume);
    MaskVolume result;
    std::optional<MaskVolume> om, tm;
    if (organ) om = predict_volume(*organ, vol, ic.threshold, ic.batch_size);
    if (tumor) tm = predict_volume(*tumor, vol, ic.threshold, ic.batch_size);
    if (om && tm && ic.suppress_outside_organ) {
      result = combine_organ_tumor(*om, *tm);
    } else {
      result = om ? *om : *tm;
      result.semantics = default_label_semantics();
      for (std::size_t i = 0; i < result.labels.size(); ++i) {
        std::uint8_t l = om && om->labels[i] ? 1 : 0;
        if (tm && tm->labels[i]) l = 2;
        result.labels[i] = l;
      }
    }
    const fs::path pred_path = dir / (vol.identifier + "_pred.nii.gz");
    write_mask(result, pred_path);
    json e{{"volume_id", vol.identifier},
           {"volume", fs::absolute(v.volume).string()},
           {"prediction", fs::absolute(pred_path).string()}};
    if (!v.mask.empty()) e["ground_truth"] = fs::absolute(v.mask).string();
    if (a.probabilities) {
      const LoadedModel& m = organ ? *organ : *tumor;
      PredictOptions po{ic.threshold, ic.batch_size, m.meta.height, m.meta.width};
      CTVolume prob = vol;
      prob.voxels = predict_probabilities(m.net, vol, m.meta.window, m.meta.input_k, po);
      const fs::path prob_path = dir / (vol.identifier + "_prob.nii.gz");
      write_volume(prob, prob_path);
      e["probabilities"] = fs::absolute(prob_path).string();
    }
    entries.push_back(e);
    out << "predicted " << vol.identifier << " -> " << pred_path.string() << '\n';
  }
  write_json(dir / "predictions.json",
             {{"threshold", ic.threshold},
              {"organ_checkpoint", ic.organ_checkpoint},
              {"tumor_checkpoint", ic.tumor_checkpoint},
              {"predictions", entries}});
  return kOk;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  std::string manifest;
  std::string method = "LinkNet-34";
  std::optional<std::string> organ_name;
  std::optional<std::string> tumor_name;
};

std::vector<EvalPair> manifest_pairs(const fs::path& path) {
  const json j = read_json(path);
  std::vector<EvalPair> pairs;
  try {
    for (const auto& e : j.at("predictions")) {
      require(e.contains("ground_truth"), ErrorCode::kConfig,
              "missing required key: predictions[].ground_truth for " +
                  e.at("volume_id").get<std::string>());
      pairs.push_back({e.at("volume_id").get<std::string>(),
                       e.at("prediction").get<std::string>(),
                       e.at("ground_truth").get<std::string>()});
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::kFormat, "malformed prediction manifest " + path.string() + ": " + ex.what());
  }
  return pairs;
}

int cmd_evaluate(const Common& c, const EvaluateArgs& a, std::ostream& out) {
  RunConfig rc = load_config(c);
  EvaluateConfig& ec = rc.evaluate;
  if (a.organ_name) ec.organ_name = *a.organ_name;
  if (a.tumor_name) ec.tumor_name = *a.tumor_name;
  if (c.out) ec.output = *c.out;
  ec.validate();
  std::vector<EvalPair> pairs = ec.pairs;
  if (!a.manifest.empty()) pairs = manifest_pairs(a.manifest);
  require(!pairs.empty(), ErrorCode::kConfig, "missing required key: evaluate.pairs");
  std::vector<VolumeMetrics> results;
  for (const auto& p : pairs) {
    const MaskVolume gt = load_mask(p.ground_truth);
    const MaskVolume pred = load_mask(p.prediction, gt.shape);
    const std::string id = p.volume_id.empty() ? gt.identifier : p.volume_id;
    results.push_back(evaluate_volume(pred, gt, LabelSelector::organ(), ec.organ_name,
                                      ec.min_area, id));
    results.push_back(evaluate_volume(pred, gt, LabelSelector::tumor(), ec.tumor_name,
                                      ec.min_area, id));
  }
  const fs::path csv = ec.output;
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  write_metrics_csv(csv, results);
  const auto summary = aggregate(results);
  out << "min_area_filter " << ec.min_area << '\n';
  out << format_results_table(summary, a.method);
  if (const auto comp = composite_dice(summary, ec.organ_name, ec.tumor_name)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", *comp);
    out << "composite (mean Dice of " << ec.organ_name << " and " << ec.tumor_name
        << "): " << buf << '\n';
  }
  out << "wrote " << csv.string() << '\n';
  return kOk;
}

// report --------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string manifest;
  std::string method = "LinkNet-34";
};

int cmd_report(const Common& c, const ReportArgs& a, std::ostream& out) {
  RunConfig rc = load_config(c);
  require(!a.metrics.empty(), ErrorCode::kInvalidArgument, "report needs --metrics");
  const fs::path dir = c.out.value_or("report");
  fs::create_directories(dir);
  std::vector<VolumeMetrics> all;
  for (const auto& m : a.metrics) {
    auto rows = read_metrics_csv(m);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  // Separate rows per evaluation mode.
  std::map<int, std::vector<VolumeMetrics>> by_mode;
  for (auto& r : all) by_mode[r.min_area_filter].push_back(r);
  std::ofstream csv(dir / "summary.csv");
  csv << "class,min_area_filter,volumes,dice_mean,dice_std,voe_mean,voe_std,rvd_mean,rvd_std\n";
  for (const auto& [mode, rows] : by_mode) {
    const auto summary = aggregate(rows);
    out << "min_area_filter " << mode << '\n' << format_results_table(summary, a.method);
    for (const auto& s : summary) {
      char line[512];
      std::snprintf(line, sizeof line, "%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    s.class_name.c_str(), mode, s.volumes, s.dice.mean, s.dice.std,
                    s.voe.mean, s.voe.std, s.rvd.mean, s.rvd.std);
      csv << line;
    }
  }
  require(csv.good(), ErrorCode::kIo, "cannot write " + (dir / "summary.csv").string());
  if (!a.manifest.empty()) {
    const json j = read_json(a.manifest);
    for (const auto& e : j.at("predictions")) {
      const CTVolume vol = load_volume(e.at("volume").get<std::string>());
      const MaskVolume pred = load_mask(e.at("prediction").get<std::string>(), vol.shape);
      const std::string id = e.at("volume_id").get<std::string>();
      std::optional<MaskVolume> gt;
      if (e.contains("ground_truth"))
        gt = load_mask(e.at("ground_truth").get<std::string>(), vol.shape);
      const int z = most_labeled_slice(gt ? *gt : pred);
      write_overlay_png(dir / (id + "_pred.png"), vol, rc.train.window, pred, z);
      if (gt) write_overlay_png(dir / (id + "_gt.png"), vol, rc.train.window, *gt, z);
    }
    out << "wrote overlays to " << dir.string() << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tumorseg: 2.5D LinkNet-34 organ and tumor segmentation for CT volumes"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON run config");
    sub->add_option("--seed", c.seed, "Random seed (overrides config)");
    sub->add_option("--out", c.out, "Output directory or file");
  };

  PhantomArgs pa;
  auto* gen = app.add_subcommand("phantom-gen", "Generate synthetic CT phantoms");
  add_common(gen);
  gen->add_option("--count", pa.count, "Number of phantoms");
  gen->add_option("--first-index", pa.first_index, "Index of the first phantom");
  gen->add_option("--depth", pa.depth);
  gen->add_option("--height", pa.height);
  gen->add_option("--width", pa.width);
  gen->add_option("--noise", pa.noise, "Noise sigma in HU");
  gen->add_option("--n-tumors", pa.n_tumors);
  gen->add_option("--radius-min", pa.radius_min, "Smallest tumor radius, voxels");
  gen->add_option("--radius-max", pa.radius_max, "Largest tumor radius, voxels");
  gen->add_option("--prefix", pa.prefix, "File name prefix");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train an organ or tumor network");
  add_common(train);
  train->add_option("--target", c.target, "organ or tumor")->check(CLI::IsMember({"organ", "tumor"}));
  train->add_option("--base-lr", ta.base_lr, "Decoder learning rate");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--resume", ta.resume, "Continue from a last.ckpt");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Segment volumes with trained networks");
  add_common(predict);
  predict->add_option("--threshold", c.threshold, "Probability threshold (strict)");
  predict->add_option("--organ-checkpoint", pr.organ_checkpoint);
  predict->add_option("--tumor-checkpoint", pr.tumor_checkpoint);
  predict->add_option("--volume", pr.volumes, "Volume to segment (repeatable)");
  predict->add_flag("--probabilities", pr.probabilities, "Also write probability maps");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  add_common(evaluate);
  evaluate->add_option("--min-area", c.min_area,
                       "Ignore ground-truth components below this per-slice area (0 = off)");
  evaluate->add_option("--manifest", ea.manifest, "predictions.json written by predict");
  evaluate->add_option("--method", ea.method, "Method label in the results table");
  evaluate->add_option("--organ-name", ea.organ_name, "Class name for labels {1,2}");
  evaluate->add_option("--tumor-name", ea.tumor_name, "Class name for label 2");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Aggregate metric CSVs and draw overlays");
  add_common(report);
  report->add_option("--metrics", ra.metrics, "Metric CSV (repeatable)");
  report->add_option("--manifest", ra.manifest, "predictions.json for overlay PNGs");
  report->add_option("--method", ra.method, "Method label in the results table");

  std::vector<std::string> argv_store{"tumorseg"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "tumorseg: error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen) return cmd_phantom_gen(c, pa, out);
    if (*train) return cmd_train(c, ta, out);
    if (*predict) return cmd_predict(c, pr, out);
    if (*evaluate) return cmd_evaluate(c, ea, out);
    if (*report) return cmd_report(c, ra, out);
  } catch (const Error& e) {
    err << "tumorseg: error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "tumorseg: error: " << e.what() << '\n';
    return kInternal;
  }
  err << "tumorseg: error: unknown subcommand\n";
  return kUsage;
}

}  // namespace tumorseg::cli
