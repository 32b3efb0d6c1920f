// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/raster.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "wfanet/binary_io.hpp"
#include "wfanet/error.hpp"

namespace wfanet {

namespace {

constexpr char kMagic[] = "WFRSv001";
constexpr std::size_t kMagicSize = 8;

}  // namespace

Raster::Raster(std::size_t b, std::size_t h, std::size_t w, float fill, std::uint32_t depth)
    : bands(b), height(h), width(w), bit_depth(depth), values(b * h * w, fill) {
  if (b == 0 || h == 0 || w == 0) throw DimensionError("raster extents must be positive");
}

Tensor Raster::to_tensor() const { return Tensor(Shape{bands, height, width}, values); }

Raster Raster::from_tensor(const Tensor& t, std::uint32_t bit_depth) {
  if (t.rank() != 3) throw DimensionError("raster tensors must be [B x H x W], got " + shape_to_string(t.shape()));
  Raster r;
  r.bands = t.dim(0);
  r.height = t.dim(1);
  r.width = t.dim(2);
  r.bit_depth = bit_depth;
  r.values.assign(t.data().begin(), t.data().end());
  return r;
}

Raster Raster::clamped() const {
  Raster r = *this;
  for (float& v : r.values) v = std::clamp(v, 0.0f, 1.0f);
  return r;
}

Raster Raster::extract_band(std::size_t b) const {
  if (b >= bands) throw DimensionError("band index " + std::to_string(b) + " out of range");
  Raster r(1, height, width, 0.0f, bit_depth);
  auto src = band(b);
  std::copy(src.begin(), src.end(), r.values.begin());
  return r;
}

void save_raster(const Raster& raster, const std::filesystem::path& path) {
  if (raster.values.size() != raster.bands * raster.height * raster.width) {
    throw DimensionError("raster value count does not match its extents");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(kMagic, kMagicSize);
  binary_io::write_u32(out, static_cast<std::uint32_t>(raster.bands));
  binary_io::write_u32(out, static_cast<std::uint32_t>(raster.height));
  binary_io::write_u32(out, static_cast<std::uint32_t>(raster.width));
  binary_io::write_u32(out, raster.bit_depth);
  binary_io::write_f32s(out, raster.values);
  if (!out) throw FormatError("failed writing " + path.string());
}

Raster load_raster(const std::filesystem::path& path, RangeCheck check) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[kMagicSize];
  if (!in.read(magic, kMagicSize)) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(magic, kMagic, kMagicSize) != 0) throw FormatError(path.string() + ": not a WFRS raster (bad magic)");
  Raster r;
  r.bands = binary_io::read_u32(in, path.string());
  r.height = binary_io::read_u32(in, path.string());
  r.width = binary_io::read_u32(in, path.string());
  r.bit_depth = binary_io::read_u32(in, path.string());
  if (r.bands == 0 || r.height == 0 || r.width == 0) throw FormatError(path.string() + ": zero extent in header");
  const std::uint64_t count = std::uint64_t{r.bands} * r.height * r.width;
  if (count > (std::uint64_t{1} << 32)) throw FormatError(path.string() + ": implausible extents");
  r.values.resize(count);
  binary_io::read_f32s(in, r.values, path.string());
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after payload");
  if (check == RangeCheck::kNormalized) {
    const auto bad = std::count_if(r.values.begin(), r.values.end(),
                                   [](float v) { return !(v >= 0.0f && v <= 1.0f); });
    if (bad) {
      throw ValidationError(path.string() + ": " + std::to_string(bad) + " values outside [0, 1]");
    }
  }
  return r;
}

}  // namespace wfanet
