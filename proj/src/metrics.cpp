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

#include "tumorseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tumorseg/error.hpp"

namespace tumorseg {

BinaryMask binarize(const MaskVolume& mask, const LabelSelector& cls) {
  BinaryMask out{mask.shape, std::vector<std::uint8_t>(mask.labels.size())};
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    out.data[i] = cls.contains(mask.labels[i]) ? 1 : 0;
  }
  return out;
}

OverlapCounts overlap_counts(const BinaryMask& a, const BinaryMask& b) {
  require(a.shape == b.shape && a.data.size() == b.data.size(),
          ErrorCode::kShapeMismatch,
          "shape mismatch: " + to_string(a.shape) + " vs " + to_string(b.shape));
  std::int64_t na = 0, nb = 0, ni = 0;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.data.size());
  const auto* pa = a.data.data();
  const auto* pb = b.data.data();
#pragma omp parallel for reduction(+ : na, nb, ni) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const bool x = pa[i] != 0;
    const bool y = pb[i] != 0;
    na += x;
    nb += y;
    ni += x && y;
  }
  return {na, nb, ni, na + nb - ni};
}

double dice_coefficient(const OverlapCounts& c) {
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.a + c.b);
}

double voe(const OverlapCounts& c) {
  require(c.union_size > 0, ErrorCode::kUndefinedMetric,
          "undefined VOE: both masks are empty");
  return 1.0 - static_cast<double>(c.intersection) / static_cast<double>(c.union_size);
}

double rvd(const OverlapCounts& c) {
  require(c.b > 0, ErrorCode::kUndefinedMetric,
          "undefined RVD: ground truth is empty");
  return static_cast<double>(c.a - c.b) / static_cast<double>(c.b);
}

double dice_coefficient(const BinaryMask& a, const BinaryMask& b) {
  return dice_coefficient(overlap_counts(a, b));
}
double voe(const BinaryMask& a, const BinaryMask& b) { return voe(overlap_counts(a, b)); }
double rvd(const BinaryMask& a, const BinaryMask& b) { return rvd(overlap_counts(a, b)); }

ComponentMap label_components(const BinaryMask& mask, bool per_slice) {
  const Shape3& s = mask.shape;
  ComponentMap m;
  m.ids.assign(mask.data.size(), 0);
  m.sizes.assign(1, 0);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.data.size(); ++seed) {
    if (!mask.data[seed] || m.ids[seed] != 0) continue;
    const auto id = static_cast<std::int32_t>(m.sizes.size());
    std::int64_t size = 0;
    stack.assign(1, seed);
    m.ids[seed] = id;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      ++size;
      const int z = static_cast<int>(v / s.plane_size());
      const int y = static_cast<int>((v / s.width) % s.height);
      const int x = static_cast<int>(v % s.width);
      auto visit = [&](int zz, int yy, int xx) {
        if (zz < 0 || yy < 0 || xx < 0 || zz >= s.depth || yy >= s.height ||
            xx >= s.width)
          return;
        const std::size_t u = s.index(zz, yy, xx);
        if (mask.data[u] && m.ids[u] == 0) {
          m.ids[u] = id;
          stack.push_back(u);
        }
      };
      visit(z, y - 1, x);
      visit(z, y + 1, x);
      visit(z, y, x - 1);
      visit(z, y, x + 1);
      if (!per_slice) {
        visit(z - 1, y, x);
        visit(z + 1, y, x);
      }
    }
    m.sizes.push_back(size);
  }
  return m;
}

BinaryMask filter_small_components(const BinaryMask& mask, int min_area,
                                   bool per_slice) {
  require(min_area >= 0, ErrorCode::kInvalidArgument, "min_area must be >= 0");
  if (min_area == 0) return mask;
  const ComponentMap m = label_components(mask, per_slice);
  BinaryMask out{mask.shape, std::vector<std::uint8_t>(mask.data.size(), 0)};
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    const auto id = m.ids[i];
    out.data[i] = (id != 0 && m.sizes[static_cast<std::size_t>(id)] >= min_area) ? 1 : 0;
  }
  return out;
}

VolumeMetrics evaluate_volume(const MaskVolume& pred, const MaskVolume& gt,
                              const LabelSelector& cls,
                              const std::string& class_name, int min_area,
                              const std::string& volume_id) {
  require(pred.shape == gt.shape, ErrorCode::kShapeMismatch,
          "shape mismatch: prediction " + to_string(pred.shape) +
              " vs ground truth " + to_string(gt.shape));
  require(min_area >= 0, ErrorCode::kInvalidArgument, "min_area must be >= 0");
  BinaryMask a = binarize(pred, cls);
  BinaryMask b = binarize(gt, cls);
  if (min_area > 0) {
    const BinaryMask kept = filter_small_components(b, min_area, true);
    const ComponentMap pc = label_components(a, true);
    std::vector<std::uint8_t> hits_kept(pc.sizes.size(), 0);
    std::vector<std::uint8_t> hits_removed(pc.sizes.size(), 0);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const auto id = static_cast<std::size_t>(pc.ids[i]);
      if (id == 0) continue;
      if (kept.data[i]) hits_kept[id] = 1;
      else if (b.data[i]) hits_removed[id] = 1;
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const auto id = static_cast<std::size_t>(pc.ids[i]);
      if (id != 0 && hits_removed[id] && !hits_kept[id]) a.data[i] = 0;
    }
    b = kept;
  }
  const OverlapCounts c = overlap_counts(a, b);
  VolumeMetrics m;
  m.volume_id = volume_id.empty() ? gt.identifier : volume_id;
  m.class_name = class_name;
  m.min_area_filter = min_area;
  m.dice = dice_coefficient(c);
  if (c.union_size > 0) m.voe = voe(c);
  if (c.b > 0) m.rvd = rvd(c);
  return m;
}

VolumeMetrics evaluate_volume(const MaskVolume& pred, const MaskVolume& gt,
                              int class_label, int min_area) {
  const auto it = gt.semantics.find(class_label);
  const std::string name =
      it != gt.semantics.end() ? it->second : "label" + std::to_string(class_label);
  return evaluate_volume(pred, gt, LabelSelector::single(class_label), name,
                         min_area);
}

namespace {

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = std::nan("");
    s.std = std::nan("");
    return s;
  }
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

}  // namespace

std::vector<ClassSummary> aggregate(const std::vector<VolumeMetrics>& results) {
  require(!results.empty(), ErrorCode::kInvalidArgument,
          "cannot aggregate an empty result set");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const VolumeMetrics*>> by_class;
  for (const auto& r : results) {
    if (!by_class.contains(r.class_name)) order.push_back(r.class_name);
    by_class[r.class_name].push_back(&r);
  }
  std::vector<ClassSummary> out;
  for (const auto& name : order) {
    auto rows = by_class[name];
    std::stable_sort(rows.begin(), rows.end(), [](const auto* x, const auto* y) {
      return x->volume_id < y->volume_id;
    });
    std::vector<double> dice, voe_v, rvd_v;
    for (const auto* r : rows) {
      dice.push_back(r->dice);
      if (r->voe) voe_v.push_back(*r->voe);
      if (r->rvd) rvd_v.push_back(*r->rvd);
    }
    ClassSummary cs;
    cs.class_name = name;
    cs.volumes = static_cast<int>(rows.size());
    cs.dice = summarize(dice);
    cs.voe = summarize(voe_v);
    cs.rvd = summarize(rvd_v);
    out.push_back(cs);
  }
  return out;
}

}  // namespace tumorseg
