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

#include "tumorseg/report.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tumorseg/error.hpp"

namespace tumorseg {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : "nan"; }

std::string mean_std(const MetricSummary& s) { return num(s.mean) + "±" + num(s.std); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_num(const std::string& s, const std::string& where) {
  if (s == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kFormat, "bad number \"" + s + "\" in " + where);
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<VolumeMetrics>& results) {
  const auto summary = aggregate(results);
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << "volume_id,class,dice,voe,rvd,min_area_filter\n";
  for (const auto& cs : summary) {
    std::vector<const VolumeMetrics*> rows;
    for (const auto& r : results)
      if (r.class_name == cs.class_name) rows.push_back(&r);
    std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
      return a->volume_id < b->volume_id;
    });
    for (const auto* r : rows) {
      out << r->volume_id << ',' << r->class_name << ',' << num(r->dice) << ','
          << opt(r->voe) << ',' << opt(r->rvd) << ',' << r->min_area_filter << '\n';
    }
  }
  for (const auto& cs : summary) {
    const int min_area = [&] {
      for (const auto& r : results)
        if (r.class_name == cs.class_name) return r.min_area_filter;
      return 0;
    }();
    out << "summary," << cs.class_name << ',' << mean_std(cs.dice) << ','
        << mean_std(cs.voe) << ',' << mean_std(cs.rvd) << ',' << min_area << '\n';
  }
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

std::vector<VolumeMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "volume_id,class,dice,voe,rvd,min_area_filter", ErrorCode::kFormat,
          "unexpected metrics CSV header in " + path.string());
  std::vector<VolumeMetrics> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    require(cells.size() == 6, ErrorCode::kFormat, "expected 6 columns at " + where);
    if (cells[0] == "summary") continue;
    VolumeMetrics m;
    m.volume_id = cells[0];
    m.class_name = cells[1];
    m.dice = parse_num(cells[2], where);
    const double v = parse_num(cells[3], where);
    const double r = parse_num(cells[4], where);
    if (!std::isnan(v)) m.voe = v;
    if (!std::isnan(r)) m.rvd = r;
    m.min_area_filter = static_cast<int>(parse_num(cells[5], where));
    out.push_back(m);
  }
  return out;
}

std::string format_results_table(const std::vector<ClassSummary>& summary,
                                 const std::string& method) {
  auto cell = [](const MetricSummary& s) {
    if (s.count == 0) return std::string("n/a");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * s.mean, 100.0 * s.std);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> rows{
      {"Method", "VOE(%)", "RVD(%)", "DICE(%)", "Type", "n"}};
  for (const auto& cs : summary) {
    rows.push_back({method, cell(cs.voe), cell(cs.rvd), cell(cs.dice), cs.class_name,
                    std::to_string(cs.volumes)});
  }
  // Display width; "±" is two bytes but one column.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], width(r[i]));
  std::ostringstream out;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    for (std::size_t i = 0; i < rows[ri].size(); ++i) {
      out << (i ? " | " : "") << rows[ri][i]
          << std::string(widths[i] - width(rows[ri][i]), ' ');
    }
    out << '\n';
    if (ri == 0) {
      for (std::size_t i = 0; i < widths.size(); ++i)
        out << (i ? "-|-" : "") << std::string(widths[i], '-');
      out << '\n';
    }
  }
  return out.str();
}

std::optional<double> composite_dice(const std::vector<ClassSummary>& summary,
                                     const std::string& organ_name,
                                     const std::string& tumor_name) {
  std::optional<double> o, t;
  for (const auto& cs : summary) {
    if (cs.class_name == organ_name) o = cs.dice.mean;
    if (cs.class_name == tumor_name) t = cs.dice.mean;
  }
  if (!o || !t) return std::nullopt;
  return (*o + *t) / 2.0;
}

int most_labeled_slice(const MaskVolume& mask) {
  const std::size_t plane = mask.shape.plane_size();
  int best = 0;
  std::size_t best_count = 0;
  for (int z = 0; z < mask.shape.depth; ++z) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < plane; ++i) c += mask.labels[z * plane + i] != 0;
    if (c > best_count) {
      best_count = c;
      best = z;
    }
  }
  return best;
}

void write_overlay_png(const std::filesystem::path& path, const CTVolume& volume,
                       const WindowSpec& window, const MaskVolume& labels, int slice) {
  require(volume.shape == labels.shape, ErrorCode::kShapeMismatch,
          "shape mismatch: volume " + to_string(volume.shape) + " vs mask " +
              to_string(labels.shape));
  require(slice >= 0 && slice < volume.shape.depth, ErrorCode::kInvalidArgument,
          "slice index out of range");
  const int h = volume.shape.height;
  const int w = volume.shape.width;
  std::vector<png_byte> rgb(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float g = window_value(volume.at(slice, y, x), window);
      float r = g, gg = g, b = g;
      const auto l = labels.at(slice, y, x);
      constexpr float a = 0.45f;
      if (l == 1) {
        r = (1 - a) * g;
        gg = (1 - a) * g + a;
        b = (1 - a) * g;
      } else if (l == 2) {
        r = (1 - a) * g + a;
        gg = (1 - a) * g + a;
        b = (1 - a) * g;
      }
      png_byte* px = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
      px[0] = static_cast<png_byte>(std::lround(std::clamp(r, 0.0f, 1.0f) * 255));
      px[1] = static_cast<png_byte>(std::lround(std::clamp(gg, 0.0f, 1.0f) * 255));
      px[2] = static_cast<png_byte>(std::lround(std::clamp(b, 0.0f, 1.0f) * 255));
    }
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  require(fp != nullptr, ErrorCode::kIo, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::kIo, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, &rgb[static_cast<std::size_t>(y) * w * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  require(std::fclose(fp) == 0, ErrorCode::kIo, "cannot write " + path.string());
}

}  // namespace tumorseg
