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

#include "tumorseg/archive.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "tumorseg/error.hpp"

namespace tumorseg {
namespace {

constexpr std::array<char, 8> kMagic{'T', 'S', 'E', 'G', 'A', 'R', 'C', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), ErrorCode::kFormat,
          "corrupt archive (truncated header): " + path.string());
  return v;
}

}  // namespace

void write_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    dir.push_back({{"name", name}, {"shape", t.shape},
                   {"offset", offset}, {"count", t.values.size()}});
    offset += t.values.size();
  }
  nlohmann::json header = {{"meta", archive.meta}, {"tensors", dir}};
  const std::string text = header.dump();

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::kIo, "cannot write " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, TensorArchive::kVersion);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors) {
      os.write(reinterpret_cast<const char*>(t.values.data()),
               static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    os.flush();
    require(static_cast<bool>(os), ErrorCode::kIo, "failed writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::kIo, "cannot move archive into place: " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::error_code ec;
  require(std::filesystem::is_regular_file(path, ec), ErrorCode::kMissingFile,
          "missing file: " + path.string());
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kIo, "cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  require(static_cast<bool>(is) && magic == kMagic, ErrorCode::kFormat,
          "corrupt archive (bad magic): " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  require(version == TensorArchive::kVersion, ErrorCode::kFormat,
          "unsupported archive version " + std::to_string(version) + ": " +
              path.string());
  const auto len = get<std::uint64_t>(is, path);
  require(len < (1ULL << 32), ErrorCode::kFormat,
          "corrupt archive (header length): " + path.string());
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  require(static_cast<bool>(is), ErrorCode::kFormat,
          "corrupt archive (truncated header): " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "corrupt archive header (" + std::string(e.what()) +
                                 "): " + path.string());
  }
  const auto data_start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto file_end = is.tellg();
  const std::uint64_t payload = static_cast<std::uint64_t>(file_end - data_start);

  TensorArchive archive;
  try {
    archive.meta = header.at("meta");
    std::uint64_t expected = 0;
    for (const auto& entry : header.at("tensors")) {
      ArchiveTensor t;
      t.shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      require(offset == expected && (offset + count) * sizeof(float) <= payload,
              ErrorCode::kFormat, "corrupt archive (tensor directory): " + path.string());
      expected += count;
      t.values.resize(count);
      is.seekg(data_start + static_cast<std::streamoff>(offset * sizeof(float)));
      is.read(reinterpret_cast<char*>(t.values.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
      require(static_cast<bool>(is), ErrorCode::kFormat,
              "corrupt archive (truncated payload): " + path.string());
      archive.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
    require(expected * sizeof(float) == payload, ErrorCode::kFormat,
            "corrupt archive (payload size): " + path.string());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "corrupt archive header (" + std::string(e.what()) +
                                 "): " + path.string());
  }
  return archive;
}

}  // namespace tumorseg
