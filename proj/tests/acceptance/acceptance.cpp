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

// End-to-end acceptance checks. Prints one [PASS]/[FAIL] line per criterion
// and exits nonzero when any fails. Usage: tumorseg_acceptance [work_dir]

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumorseg/archive.hpp"
#include "tumorseg/blas_env.hpp"
#include "tumorseg/cli.hpp"
#include "tumorseg/config.hpp"
#include "tumorseg/metrics.hpp"
#include "tumorseg/network.hpp"
#include "tumorseg/objectives.hpp"
#include "tumorseg/phantom.hpp"
#include "tumorseg/report.hpp"
#include "tumorseg/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tumorseg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Runs a command and throws with its stderr on a nonzero exit.
std::string must_run(const std::vector<std::string>& args) {
  const CliResult r = run_cli(args);
  if (r.code != cli::kOk) {
    throw std::runtime_error(args[0] + " exited " + std::to_string(r.code) + ": " + r.err);
  }
  return r.out;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// ---- criterion 1 ----------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20261014);
  const Shape3 shape{8, 8, 8};
  int mismatches = 0;
  int trials = 0;
  for (int t = 0; t < 200; ++t) {
    // Vary density so empty and full masks show up too.
    const double pa = (t % 10) / 9.0;
    const double pb = ((t / 10) % 10) / 9.0;
    std::bernoulli_distribution da(pa), db(pb);
    BinaryMask a{shape, std::vector<std::uint8_t>(shape.voxel_count())};
    BinaryMask b = a;
    for (auto& v : a.data) v = da(gen);
    for (auto& v : b.data) v = db(gen);

    std::int64_t na = 0, nb = 0, inter = 0, uni = 0;
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const bool va = a.data[shape.index(z, y, x)] != 0;
          const bool vb = b.data[shape.index(z, y, x)] != 0;
          na += va;
          nb += vb;
          inter += va && vb;
          uni += va || vb;
        }
    ++trials;
    bool ok = true;
    const double dice_bf = na + nb == 0 ? 1.0 : 2.0 * inter / static_cast<double>(na + nb);
    ok &= dice_coefficient(a, b) == dice_bf;
    if (uni > 0) {
      const double j = static_cast<double>(inter) / static_cast<double>(uni);
      ok &= voe(a, b) == 1.0 - j;
      // dice = 2J/(1+J) reduces to |A| + |B| = |A u B| + |A n B|.
      ok &= na + nb == uni + inter;
      ok &= std::abs(dice_coefficient(a, b) - 2.0 * j / (1.0 + j)) <= 1e-15;
    } else {
      try {
        voe(a, b);
        ok = false;
      } catch (const Error&) {
      }
    }
    if (nb > 0) {
      ok &= rvd(a, b) == static_cast<double>(na - nb) / static_cast<double>(nb);
    }
    if (!ok) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt("%d/%d random 8x8x8 pairs match brute force, %.2f s", trials - mismatches,
              trials, secs)};
}

// ---- criterion 2 ----------------------------------------------------------

Outcome loss_correctness() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::bernoulli_distribution coin(0.4);
  const LossConfig cfg;
  double worst_p = 0, worst_logit = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> y(64), p(64);
    for (auto& v : y) v = coin(gen);
    for (auto& v : p) v = u(gen);
    const auto g = composite_loss_grad<double>(y, p, cfg);
    std::vector<double> dl(64);
    composite_loss_logit_grad<double>(y, p, cfg, dl);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-6;
      auto at = [&](double v) {
        auto q = p;
        q[i] = v;
        return composite_loss<double>(y, q, cfg);
      };
      const double fd = (at(p[i] + h) - at(p[i] - h)) / (2 * h);
      worst_p = std::max(worst_p, std::abs(g[i] - fd) / std::max(std::abs(fd), 1e-3));
      // Same check through the sigmoid.
      const double z = std::log(p[i] / (1 - p[i]));
      auto sig = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };
      const double fdz = (at(sig(z + h)) - at(sig(z - h))) / (2 * h);
      worst_logit = std::max(worst_logit, std::abs(dl[i] - fdz) / std::max(std::abs(fdz), 1e-3));
    }
  }
  LossConfig no_smooth;
  no_smooth.smooth = 0;
  const std::vector<double> ones(64, 1.0), half(64, 0.5);
  const double bce = binary_cross_entropy<double>(ones, half, no_smooth);
  const double comp = composite_loss<double>(ones, half, no_smooth);
  const bool pass = worst_p <= 1e-4 && worst_logit <= 1e-4 &&
                    std::abs(bce - 0.6931) <= 1e-4 && std::abs(comp - 1.0986) <= 1e-4;
  return {pass, fmt("max rel err dp %.2e, dlogit %.2e; BCE %.4f, composite %.4f", worst_p,
                    worst_logit, bce, comp)};
}

// ---- criterion 3 ----------------------------------------------------------

Outcome transfer_adaptation(const fs::path& work) {
  // Random RGB encoder saved under torchvision ResNet-34 names.
  NetworkConfig rgb_cfg;
  rgb_cfg.in_channels = 3;
  SegNetwork source(rgb_cfg, 99);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> u(0.5f, 1.5f);
  TensorArchive archive;
  archive.meta = {{"source", "synthetic"}, {"arch", "resnet34"}};
  for (const auto& p : source.store().parameters())
    if (p->group == ParamGroup::kEncoder) archive.tensors[p->name] = {p->shape, p->value};
  for (const auto& b : source.store().buffers()) {
    if (b->name.rfind("decoder", 0) == 0) continue;
    auto values = b->value;
    if (b->name.find("running_var") != std::string::npos)
      for (auto& v : values) v = u(gen);
    archive.tensors[b->name] = {{static_cast<int>(values.size())}, values};
  }
  const fs::path path = work / "resnet34_synthetic.tsa";
  write_archive(archive, path);

  NetworkConfig c3 = rgb_cfg;
  c3.pretrained_encoder = true;
  c3.pretrained_path = path.string();
  NetworkConfig c1 = c3;
  c1.in_channels = 1;
  const SegNetwork rgb = build_network(c3, 1);
  const SegNetwork gray = build_network(c1, 2);

  std::uniform_real_distribution<float> img(0.0f, 1.0f);
  Tensor g(1, 2, 64, 64);
  for (auto& v : g.data) v = img(gen);
  Tensor rep(3, 2, 64, 64);
  for (int c = 0; c < 3; ++c) std::copy(g.data.begin(), g.data.end(), rep.channel(c));
  const Tensor a = gray.stem_response(g);
  const Tensor b = rgb.stem_response(rep);
  double diff = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    diff = std::max(diff, static_cast<double>(std::abs(a.data[i] - b.data[i])));
  return {diff <= 1e-5, fmt("max |stem_1ch - stem_3ch(replicated)| = %.2e over %zu outputs",
                            diff, a.size())};
}

// ---- criterion 4 ----------------------------------------------------------

Outcome lr_contract() {
  TrainConfig cfg;
  cfg.base_lr = 3e-4;
  Trainer trainer(cfg);
  const auto& groups = trainer.optimizer().groups();
  std::set<const Parameter*> seen;
  bool disjoint = true;
  for (const auto* g : {&groups.encoder, &groups.decoder})
    for (const auto* p : g->params) disjoint &= seen.insert(p).second;
  bool covers = seen.size() == trainer.net().store().parameters().size();
  for (const auto& p : trainer.net().store().parameters()) covers &= seen.count(p.get()) == 1;
  const bool ratio = groups.encoder.lr == 0.1 * groups.decoder.lr &&
                     groups.decoder.lr == cfg.base_lr;
  bool slots = true;
  for (const auto& s : trainer.optimizer().slots()) {
    slots &= s.lr == (s.param->group == ParamGroup::kEncoder ? groups.encoder.lr
                                                              : groups.decoder.lr);
  }
  return {disjoint && covers && ratio && slots,
          fmt("encoder %zu tensors at lr %.1e, decoder %zu tensors at lr %.1e, partition %s",
              groups.encoder.params.size(), groups.encoder.lr, groups.decoder.params.size(),
              groups.decoder.lr, disjoint && covers ? "complete" : "broken")};
}

// ---- criterion 5 ----------------------------------------------------------

Outcome single_batch_overfit() {
  const auto t0 = Clock::now();
  PhantomSpec spec;
  spec.seed = 17;
  const Phantom ph = generate_phantom(spec);
  TrainConfig cfg;
  cfg.base_lr = 1e-3;
  cfg.augment_enabled = false;
  cfg.seed = 4;
  const auto samples = volume_samples(ph.volume, ph.mask, cfg);
  const SliceSample& s = samples[samples.size() / 2];
  const OverfitResult r = overfit_sample(s, cfg, 200);
  const double secs = seconds_since(t0);
  return {r.loss <= 0.05 && r.soft_dice >= 0.95 && secs < 120.0,
          fmt("slice %d, %d steps: loss %.4f, soft Dice %.4f, %.1f s", s.slice_index, r.steps,
              r.loss, r.soft_dice, secs)};
}

// ---- criteria 6 to 8 ------------------------------------------------------

struct Pipeline {
  int phantoms = 25;
  int val = 5;
  int depth = 32;
  int size = 64;
  int organ_epochs = 10;
  int tumor_epochs = 10;
  std::uint64_t seed = 7;
};

struct PipelineRun {
  fs::path metrics0;
  fs::path metrics100;
  std::string evaluate_out;
  fs::path organ_history;
  double seconds = 0;
};

void log_step(const std::string& what, Clock::time_point t0) {
  std::cout << fmt("  [%7.1f s] ", seconds_since(t0)) << what << std::endl;
}

PipelineRun run_pipeline(const Pipeline& pl, const fs::path& dir) {
  const auto t0 = Clock::now();
  fs::create_directories(dir);
  const fs::path ph = dir / "phantoms";
  must_run({"phantom-gen", "--count", std::to_string(pl.phantoms), "--depth",
            std::to_string(pl.depth), "--height", std::to_string(pl.size), "--width",
            std::to_string(pl.size), "--radius-min", "4", "--radius-max", "9", "--seed",
            std::to_string(pl.seed), "--out", ph.string()});
  const json manifest = read_json(ph / "manifest.json");
  json train = json::array(), val = json::array();
  const int n_train = pl.phantoms - pl.val;
  for (int i = 0; i < pl.phantoms; ++i) {
    const auto& e = manifest["phantoms"][i];
    (i < n_train ? train : val).push_back({{"volume", e["volume"]}, {"mask", e["mask"]}});
  }
  const json cfg = {
      {"train",
       {{"epochs", pl.organ_epochs},
        {"batch_size", 8},
        {"base_lr", 1e-3},
        {"seed", 1},
        {"input_k", 1},
        {"size", {pl.size, pl.size}},
        {"augment", false},
        {"train_volumes", train},
        {"val_volumes", val}}},
      {"window", {{"preset", "liver"}}},
      {"inference", {{"volumes", val}}},
      {"evaluate", {{"min_area", 0}}}};
  const fs::path cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << cfg.dump(2);
  log_step("generated " + std::to_string(pl.phantoms) + " phantoms", t0);

  const fs::path runs = dir / "runs";
  must_run({"train", "--config", cfg_path.string(), "--target", "organ", "--out",
            runs.string()});
  log_step("trained organ network", t0);
  must_run({"train", "--config", cfg_path.string(), "--target", "tumor", "--epochs",
            std::to_string(pl.tumor_epochs), "--out", runs.string()});
  log_step("trained tumor network", t0);
  const json organ = read_json(runs / "train_organ.json");
  const json tumor = read_json(runs / "train_tumor.json");
  must_run({"predict", "--config", cfg_path.string(), "--organ-checkpoint",
            organ["best_checkpoint"].get<std::string>(), "--tumor-checkpoint",
            tumor["best_checkpoint"].get<std::string>(), "--out", (dir / "pred").string()});
  log_step("predicted validation volumes", t0);

  PipelineRun r;
  r.metrics0 = dir / "metrics_min0.csv";
  r.metrics100 = dir / "metrics_min100.csv";
  const std::string manifest_path = (dir / "pred" / "predictions.json").string();
  r.evaluate_out = must_run({"evaluate", "--config", cfg_path.string(), "--manifest",
                             manifest_path, "--out", r.metrics0.string()});
  must_run({"evaluate", "--config", cfg_path.string(), "--manifest", manifest_path,
            "--min-area", "100", "--out", r.metrics100.string()});
  r.organ_history = fs::path(organ["run_dir"].get<std::string>()) / "history.csv";
  r.seconds = seconds_since(t0);
  log_step("evaluated", t0);
  return r;
}

double mean_dice(const fs::path& csv, const std::string& cls) {
  for (const auto& s : aggregate(read_metrics_csv(csv)))
    if (s.class_name == cls) return s.dice.mean;
  return NAN;
}

std::vector<double> val_losses(const fs::path& history) {
  std::ifstream in(history);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 3 && std::getline(ss, cell, ','); ++c) {
    }
    out.push_back(std::stod(cell));
  }
  return out;
}

Outcome end_to_end(const PipelineRun& r) {
  const double organ = mean_dice(r.metrics0, "organ");
  const double tumor0 = mean_dice(r.metrics0, "tumor");
  const double tumor100 = mean_dice(r.metrics100, "tumor");
  const bool pass = organ >= 0.85 && tumor0 >= 0.60 && tumor100 >= tumor0 &&
                    r.seconds <= 900.0;
  return {pass, fmt("organ Dice %.4f, tumor Dice %.4f (min_area 0), %.4f (min_area 100), "
                    "%.0f s",
                    organ, tumor0, tumor100, r.seconds)};
}

Outcome smoothed_val_loss(const PipelineRun& r) {
  const auto v = val_losses(r.organ_history);
  std::vector<double> smooth;
  for (std::size_t e = 5; e <= v.size() && e <= 10; ++e) {
    double s = 0;
    for (std::size_t i = e - 5; i < e; ++i) s += v[i];
    smooth.push_back(s / 5);
  }
  bool dec = smooth.size() >= 2;
  for (std::size_t i = 1; i < smooth.size(); ++i) dec &= smooth[i] < smooth[i - 1];
  std::string series;
  for (double s : smooth) series += fmt(" %.4f", s);
  return {dec, "organ 5-epoch mean val loss, epochs 5-10:" + series};
}

std::vector<std::vector<std::string>> read_cells(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

// Numbers in a cell; "mean±std" yields two.
std::vector<double> numbers(const std::string& cell) {
  std::vector<double> out;
  std::size_t pos = 0;
  const std::string pm = "\xC2\xB1";
  while (pos <= cell.size()) {
    const std::size_t next = cell.find(pm, pos);
    const std::string part = cell.substr(pos, next == std::string::npos ? next : next - pos);
    if (part == "nan") {
      out.push_back(NAN);
    } else {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    }
    if (next == std::string::npos) break;
    pos = next + pm.size();
  }
  return out;
}

// Max abs difference over numeric cells; INFINITY on any structural mismatch.
double csv_distance(const fs::path& a, const fs::path& b) {
  const auto ra = read_cells(a), rb = read_cells(b);
  if (ra.size() != rb.size() || ra.size() < 2) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].size() != rb[i].size()) return INFINITY;
    for (std::size_t j = 0; j < ra[i].size(); ++j) {
      if (ra[i][j] == rb[i][j]) continue;
      std::vector<double> x, y;
      try {
        x = numbers(ra[i][j]);
        y = numbers(rb[i][j]);
      } catch (const std::exception&) {
        return INFINITY;
      }
      if (x.size() != y.size()) return INFINITY;
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (std::isnan(x[k]) != std::isnan(y[k])) return INFINITY;
        if (!std::isnan(x[k])) worst = std::max(worst, std::abs(x[k] - y[k]));
      }
    }
  }
  return worst;
}

Outcome determinism(const fs::path& work) {
  Pipeline small;
  small.phantoms = 6;
  small.val = 2;
  small.organ_epochs = 2;
  small.tumor_epochs = 2;
  small.seed = 11;
  const PipelineRun a = run_pipeline(small, work / "det_a");
  const PipelineRun b = run_pipeline(small, work / "det_b");
  const double d0 = csv_distance(a.metrics0, b.metrics0);
  const double d100 = csv_distance(a.metrics100, b.metrics100);
  return {d0 <= 1e-4 && d100 <= 1e-4,
          fmt("two seeded runs (%d phantoms, %d+%d epochs): max CSV cell diff %.2e / %.2e",
              small.phantoms, small.organ_epochs, small.tumor_epochs, d0, d100)};
}

Outcome full_scale_documented(const PipelineRun& r) {
  const fs::path src = TUMORSEG_SOURCE_DIR;
  std::string readme;
  {
    std::ifstream in(src / "README.md");
    std::stringstream ss;
    ss << in.rdbuf();
    readme = ss.str();
  }
  bool config_ok = false;
  try {
    const RunConfig rc = load_run_config(src / "configs" / "lits_full.json");
    config_ok = rc.train.network.pretrained_encoder && rc.train.augment_enabled &&
                rc.train.height == 512 && rc.train.width == 512;
  } catch (const std::exception&) {
  }
  const bool readme_ok = readme.find("configs/lits_full.json") != std::string::npos &&
                         readme.find("not reproduced") != std::string::npos;
  const std::string& out = r.evaluate_out;
  std::string squeezed;
  for (char c : out)
    if (c != ' ') squeezed += c;
  const bool table_ok = squeezed.find("Method|VOE(%)|RVD(%)|DICE(%)|Type") != std::string::npos &&
                        out.find("| organ") != std::string::npos &&
                        out.find("| tumor") != std::string::npos &&
                        out.find("\xC2\xB1") != std::string::npos;
  return {config_ok && readme_ok && table_ok,
          fmt("full-scale config %s, README %s, evaluate table %s", config_ok ? "ok" : "missing",
              readme_ok ? "ok" : "missing", table_ok ? "ok" : "missing")};
}

}  // namespace

int main(int argc, char** argv) {
  reexec_with_native_blas(argc, argv);
  const fs::path work = argc > 1 ? fs::path(argv[1])
                                 : fs::temp_directory_path() /
                                       ("tumorseg_acceptance_" + std::to_string(getpid()));
  fs::create_directories(work);
  std::cout << "work directory: " << work.string() << "\nBLAS kernels: " << blas_core_name()
            << std::endl;

  int failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << std::endl;
  };

  report("criterion 1 metric oracle", metric_oracle);
  report("criterion 2 loss gradients and closed forms", loss_correctness);
  report("criterion 3 adapted stem", [&] { return transfer_adaptation(work); });
  report("criterion 4 differential learning rates", lr_contract);
  report("criterion 5 single-batch overfit", single_batch_overfit);

  std::optional<PipelineRun> full;
  try {
    std::cout << "end-to-end phantom run" << std::endl;
    full = run_pipeline(Pipeline{}, work / "full");
  } catch (const std::exception& e) {
    std::cout << "  pipeline error: " << e.what() << std::endl;
  }
  auto need_full = [&](auto fn) {
    return [&, fn] {
      if (!full) return Outcome{false, "end-to-end run did not complete"};
      return fn(*full);
    };
  };
  report("criterion 6 end-to-end phantom run", need_full(end_to_end));
  report("criterion 6 smoothed validation loss", need_full(smoothed_val_loss));
  std::cout << "determinism runs" << std::endl;
  report("criterion 7 determinism", [&] { return determinism(work); });
  report("criterion 8 full-scale config and results table", need_full(full_scale_documented));

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
