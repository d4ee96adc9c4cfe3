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
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace tumorseg {

struct ArchiveTensor {
  std::vector<int> shape;
  std::vector<float> values;
};

/// Versioned binary container: an 8-byte magic, a format version, a JSON
/// header (metadata plus a tensor directory) and raw little-endian float32
/// payloads. Values round-trip bit-exactly.
struct TensorArchive {
  static constexpr int kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, ArchiveTensor> tensors;
};

void write_archive(const TensorArchive& archive, const std::filesystem::path& path);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace tumorseg
