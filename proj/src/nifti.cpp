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

#include "tumorseg/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <memory>

#include "tumorseg/error.hpp"

namespace tumorseg {
namespace {

// NIfTI-1 header field offsets.
constexpr int kOffSizeofHdr = 0;
constexpr int kOffDim = 40;
constexpr int kOffDatatype = 70;
constexpr int kOffBitpix = 72;
constexpr int kOffPixdim = 76;
constexpr int kOffVoxOffset = 108;
constexpr int kOffSclSlope = 112;
constexpr int kOffSclInter = 116;
constexpr int kOffXyztUnits = 123;
constexpr int kOffSformCode = 254;
constexpr int kOffSrowX = 280;
constexpr int kOffMagic = 344;
constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;

enum : std::int16_t {
  kDtUint8 = 2,
  kDtInt16 = 4,
  kDtInt32 = 8,
  kDtFloat32 = 16,
  kDtFloat64 = 64,
  kDtInt8 = 256,
  kDtUint16 = 512,
  kDtUint32 = 768,
  kDtInt64 = 1024,
  kDtUint64 = 1280,
};

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kDtUint8: case kDtInt8: return 1;
    case kDtInt16: case kDtUint16: return 2;
    case kDtInt32: case kDtUint32: case kDtFloat32: return 4;
    case kDtFloat64: case kDtInt64: case kDtUint64: return 8;
    default: return 0;
  }
}

struct GzCloser {
  void operator()(gzFile f) const { if (f) gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

template <typename T>
T read_field(const NiftiHeaderBytes& h, int offset, bool swap) {
  T v;
  std::memcpy(&v, h.data() + offset, sizeof(T));
  if (swap) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void write_field(NiftiHeaderBytes& h, int offset, T v) {
  std::memcpy(h.data() + offset, &v, sizeof(T));
}

void swap_each(std::vector<std::uint8_t>& bytes, int width) {
  if (width == 1) return;
  for (std::size_t i = 0; i + width <= bytes.size(); i += width) {
    std::reverse(bytes.begin() + static_cast<std::ptrdiff_t>(i),
                 bytes.begin() + static_cast<std::ptrdiff_t>(i + width));
  }
}

double decode(const std::uint8_t* p, std::int16_t dt) {
  auto get = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  switch (dt) {
    case kDtUint8: return get(std::uint8_t{});
    case kDtInt8: return get(std::int8_t{});
    case kDtInt16: return get(std::int16_t{});
    case kDtUint16: return get(std::uint16_t{});
    case kDtInt32: return get(std::int32_t{});
    case kDtUint32: return get(std::uint32_t{});
    case kDtFloat32: return get(float{});
    case kDtFloat64: return get(double{});
    case kDtInt64: return get(std::int64_t{});
    case kDtUint64: return get(std::uint64_t{});
    default: return 0.0;
  }
}

struct RawImage {
  Shape3 shape;
  Spacing3 spacing{};
  std::vector<double> values;
  NiftiHeaderBytes header{};
};

RawImage read_nifti(const std::filesystem::path& path) {
  std::error_code ec;
  require(std::filesystem::is_regular_file(path, ec), ErrorCode::kMissingFile,
          "missing file: " + path.string());
  GzHandle f(gzopen(path.c_str(), "rb"));
  require(f != nullptr, ErrorCode::kIo, "cannot open " + path.string());

  RawImage img;
  const int got = gzread(f.get(), img.header.data(), kHeaderSize);
  require(got == kHeaderSize, ErrorCode::kFormat,
          "unparsable NIfTI header (truncated): " + path.string());

  bool swap = false;
  auto sizeof_hdr = read_field<std::int32_t>(img.header, kOffSizeofHdr, false);
  if (sizeof_hdr != kHeaderSize) {
    swap = true;
    sizeof_hdr = read_field<std::int32_t>(img.header, kOffSizeofHdr, true);
  }
  require(sizeof_hdr == kHeaderSize, ErrorCode::kFormat,
          "unparsable NIfTI header (sizeof_hdr): " + path.string());
  const char* magic = reinterpret_cast<const char*>(img.header.data() + kOffMagic);
  require(std::strncmp(magic, "n+1", 3) == 0 || std::strncmp(magic, "ni1", 3) == 0,
          ErrorCode::kFormat, "unparsable NIfTI header (magic): " + path.string());
  require(std::strncmp(magic, "n+1", 3) == 0, ErrorCode::kFormat,
          "detached .hdr/.img pairs are not supported: " + path.string());

  std::array<std::int16_t, 8> dim{};
  for (int i = 0; i < 8; ++i) {
    dim[static_cast<std::size_t>(i)] =
        read_field<std::int16_t>(img.header, kOffDim + 2 * i, swap);
  }
  require(dim[0] >= 1 && dim[0] <= 7, ErrorCode::kFormat,
          "unparsable NIfTI header (dim[0]): " + path.string());
  bool three_d = dim[0] >= 3 && dim[1] >= 1 && dim[2] >= 1 && dim[3] >= 1;
  for (int i = 4; i <= dim[0]; ++i) {
    three_d = three_d && dim[static_cast<std::size_t>(i)] == 1;
  }
  require(three_d, ErrorCode::kDimensionality,
          "non-3D volume (dim[0]=" + std::to_string(dim[0]) + "): " +
              path.string());
  img.shape = {dim[3], dim[2], dim[1]};

  for (int i = 1; i <= 3; ++i) {
    const float p = read_field<float>(img.header, kOffPixdim + 4 * i, swap);
    img.spacing[static_cast<std::size_t>(3 - i)] = std::fabs(p);
  }
  const auto dt = read_field<std::int16_t>(img.header, kOffDatatype, swap);
  const int bpv = bytes_per_voxel(dt);
  require(bpv > 0, ErrorCode::kFormat,
          "unsupported NIfTI datatype " + std::to_string(dt) + ": " +
              path.string());
  const float vox_offset = read_field<float>(img.header, kOffVoxOffset, swap);
  require(vox_offset >= kHeaderSize, ErrorCode::kFormat,
          "unparsable NIfTI header (vox_offset): " + path.string());
  require(gzseek(f.get(), static_cast<z_off_t>(vox_offset), SEEK_SET) >= 0,
          ErrorCode::kFormat, "cannot seek to voxel data: " + path.string());

  const std::size_t n = img.shape.voxel_count();
  std::vector<std::uint8_t> bytes(n * static_cast<std::size_t>(bpv));
  std::size_t done = 0;
  while (done < bytes.size()) {
    const unsigned chunk = static_cast<unsigned>(
        std::min<std::size_t>(bytes.size() - done, 1u << 30));
    const int r = gzread(f.get(), bytes.data() + done, chunk);
    require(r > 0, ErrorCode::kFormat,
            "truncated voxel data: " + path.string());
    done += static_cast<std::size_t>(r);
  }
  if (swap) swap_each(bytes, bpv);

  float slope = read_field<float>(img.header, kOffSclSlope, swap);
  float inter = read_field<float>(img.header, kOffSclInter, swap);
  const bool scaled = std::isfinite(slope) && slope != 0.0f &&
                      !(slope == 1.0f && inter == 0.0f);
  if (!std::isfinite(inter)) inter = 0.0f;

  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = decode(bytes.data() + i * static_cast<std::size_t>(bpv), dt);
    if (scaled) v = v * slope + inter;
    img.values[i] = v;
  }
  if (swap) {
    // Outputs are written little-endian; keep the mirrored header consistent.
    img.header.fill(0);
  }
  return img;
}

NiftiHeaderBytes make_header(const std::optional<NiftiHeaderBytes>& source,
                             const Shape3& shape, const Spacing3& spacing,
                             std::int16_t datatype, std::int16_t bitpix) {
  NiftiHeaderBytes h{};
  const bool have_source =
      source && read_field<std::int32_t>(*source, kOffSizeofHdr, false) ==
                    kHeaderSize;
  if (have_source) {
    h = *source;
  } else {
    write_field<float>(h, kOffPixdim, 1.0f);  // qfac
    h[kOffXyztUnits] = 2;                     // mm
    write_field<std::int16_t>(h, kOffSformCode, 2);
    const float diag[3] = {static_cast<float>(spacing[2]),
                           static_cast<float>(spacing[1]),
                           static_cast<float>(spacing[0])};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        write_field<float>(h, kOffSrowX + 16 * r + 4 * c, r == c ? diag[r] : 0.0f);
      }
    }
  }
  write_field<std::int32_t>(h, kOffSizeofHdr, kHeaderSize);
  const std::int16_t dims[8] = {3,
                                static_cast<std::int16_t>(shape.width),
                                static_cast<std::int16_t>(shape.height),
                                static_cast<std::int16_t>(shape.depth),
                                1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) write_field<std::int16_t>(h, kOffDim + 2 * i, dims[i]);
  write_field<std::int16_t>(h, kOffDatatype, datatype);
  write_field<std::int16_t>(h, kOffBitpix, bitpix);
  write_field<float>(h, kOffPixdim + 4, static_cast<float>(spacing[2]));
  write_field<float>(h, kOffPixdim + 8, static_cast<float>(spacing[1]));
  write_field<float>(h, kOffPixdim + 12, static_cast<float>(spacing[0]));
  write_field<float>(h, kOffVoxOffset, static_cast<float>(kDataOffset));
  write_field<float>(h, kOffSclSlope, 1.0f);
  write_field<float>(h, kOffSclInter, 0.0f);
  std::memcpy(h.data() + kOffMagic, "n+1\0", 4);
  return h;
}

bool is_gzip_path(const std::filesystem::path& path) {
  return path.extension() == ".gz";
}

void write_nifti(const std::filesystem::path& path, const NiftiHeaderBytes& h,
                 const void* data, std::size_t bytes) {
  static_assert(std::endian::native == std::endian::little,
                "NIfTI writer assumes a little-endian host");
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  GzHandle f(gzopen(path.c_str(), is_gzip_path(path) ? "wb6" : "wbT"));
  require(f != nullptr, ErrorCode::kIo, "cannot write " + path.string());
  const std::uint8_t extension[4] = {0, 0, 0, 0};
  bool ok = gzwrite(f.get(), h.data(), kHeaderSize) == kHeaderSize;
  ok = ok && gzwrite(f.get(), extension, 4) == 4;
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::size_t done = 0;
  while (ok && done < bytes) {
    const unsigned chunk =
        static_cast<unsigned>(std::min<std::size_t>(bytes - done, 1u << 30));
    ok = gzwrite(f.get(), p + done, chunk) == static_cast<int>(chunk);
    done += chunk;
  }
  gzFile raw = f.release();
  ok = (gzclose(raw) == Z_OK) && ok;
  require(ok, ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace

std::string volume_identifier(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  for (const char* suffix : {".nii.gz", ".nii"}) {
    const std::string s(suffix);
    if (name.size() > s.size() &&
        name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return name.substr(0, name.size() - s.size());
    }
  }
  return name;
}

CTVolume load_volume(const std::filesystem::path& path) {
  RawImage raw = read_nifti(path);
  CTVolume vol;
  vol.shape = raw.shape;
  vol.spacing = raw.spacing;
  vol.identifier = volume_identifier(path);
  vol.voxels.resize(raw.values.size());
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    require(std::isfinite(raw.values[i]), ErrorCode::kNonFinite,
            "non-finite voxel at index " + std::to_string(i) + ": " +
                path.string());
    vol.voxels[i] = static_cast<float>(raw.values[i]);
  }
  for (double& s : vol.spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      fail(ErrorCode::kFormat, "invalid pixdim spacing in " + path.string());
    }
  }
  if (std::any_of(raw.header.begin(), raw.header.end(),
                  [](std::uint8_t b) { return b != 0; })) {
    vol.source_header = raw.header;
  }
  return vol;
}

MaskVolume load_mask(const std::filesystem::path& path,
                     const Shape3& expected_shape,
                     const LabelSemantics& semantics) {
  MaskVolume mask = load_mask(path, semantics);
  require(mask.shape == expected_shape, ErrorCode::kShapeMismatch,
          "shape mismatch: mask " + to_string(mask.shape) + " vs volume " +
              to_string(expected_shape) + " (" + path.string() + ")");
  return mask;
}

MaskVolume load_mask(const std::filesystem::path& path,
                     const LabelSemantics& semantics) {
  RawImage raw = read_nifti(path);
  MaskVolume mask;
  mask.shape = raw.shape;
  mask.spacing = raw.spacing;
  mask.semantics = semantics;
  mask.identifier = volume_identifier(path);
  mask.labels.resize(raw.values.size());
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const double v = raw.values[i];
    require(std::isfinite(v) && std::fabs(v - std::round(v)) <= 1e-6,
            ErrorCode::kFormat,
            "non-integer label " + std::to_string(v) + " in " + path.string());
    const long r = std::lround(v);
    require(r >= 0 && r < 256 && semantics.contains(static_cast<int>(r)),
            ErrorCode::kFormat,
            "label " + std::to_string(r) + " outside declared semantics in " +
                path.string());
    mask.labels[i] = static_cast<std::uint8_t>(r);
  }
  if (std::any_of(raw.header.begin(), raw.header.end(),
                  [](std::uint8_t b) { return b != 0; })) {
    mask.source_header = raw.header;
  }
  return mask;
}

void write_volume(const CTVolume& volume, const std::filesystem::path& path) {
  require(volume.voxels.size() == volume.shape.voxel_count(),
          ErrorCode::kShapeMismatch, "voxel buffer does not match shape");
  const auto h = make_header(volume.source_header, volume.shape, volume.spacing,
                             kDtFloat32, 32);
  write_nifti(path, h, volume.voxels.data(), volume.voxels.size() * sizeof(float));
}

void write_mask(const MaskVolume& mask, const std::filesystem::path& path) {
  require(mask.labels.size() == mask.shape.voxel_count(),
          ErrorCode::kShapeMismatch, "label buffer does not match shape");
  const auto h =
      make_header(mask.source_header, mask.shape, mask.spacing, kDtUint8, 8);
  write_nifti(path, h, mask.labels.data(), mask.labels.size());
}

}  // namespace tumorseg
