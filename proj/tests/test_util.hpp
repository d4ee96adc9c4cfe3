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

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "tumorseg/config.hpp"
#include "tumorseg/error.hpp"
#include "tumorseg/phantom.hpp"
#include "tumorseg/volume.hpp"

namespace tumorseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tumorseg-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline MaskVolume make_mask(Shape3 shape, std::uint8_t fill = 0) {
  MaskVolume m;
  m.shape = shape;
  m.labels.assign(shape.voxel_count(), fill);
  m.identifier = "mask";
  return m;
}

inline CTVolume make_volume(Shape3 shape, float fill = 0.0f) {
  CTVolume v;
  v.shape = shape;
  v.voxels.assign(shape.voxel_count(), fill);
  v.identifier = "volume";
  return v;
}

/// Writes `count` small phantoms named ph_000.. into `dir`.
inline std::vector<VolumePair> write_phantoms(const std::filesystem::path& dir, int count,
                                              Shape3 shape = {16, 32, 32},
                                              std::uint64_t seed = 1) {
  std::vector<VolumePair> out;
  for (int i = 0; i < count; ++i) {
    PhantomSpec spec;
    spec.shape = shape;
    spec.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    spec.tumor_radius_range = {2.0, 4.0};
    char name[32];
    std::snprintf(name, sizeof name, "ph_%03d", i);
    spec.identifier = name;
    const Phantom p = generate_phantom(spec);
    const auto files = write_phantom(p.volume, p.mask, dir);
    out.push_back({files.volume.string(), files.mask.string()});
  }
  return out;
}

/// Small, fast training setup over the given volumes.
inline TrainConfig small_train_config(const std::vector<VolumePair>& train,
                                      const std::vector<VolumePair>& val,
                                      const std::filesystem::path& out_dir) {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.base_lr = 1e-3;
  c.seed = 3;
  c.height = 32;
  c.width = 32;
  c.augment_enabled = false;
  c.train_volumes = train;
  c.val_volumes = val;
  c.output_dir = out_dir.string();
  return c;
}

/// Runs `fn` and returns the ErrorCode it throws; fails the test otherwise.
template <typename Fn>
ErrorCode thrown_code(Fn&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected tumorseg::Error";
  return ErrorCode::kInvalidArgument;
}

}  // namespace tumorseg::testing
