// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wfanet/tensor.hpp"

namespace wfanet {

/// Band-sequential, row-major image with float32 samples.
struct Raster {
  std::size_t bands = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint32_t bit_depth = 11;  // metadata only
  std::vector<float> values;

  Raster() = default;
  Raster(std::size_t b, std::size_t h, std::size_t w, float fill = 0.0f, std::uint32_t depth = 11);

  float& at(std::size_t b, std::size_t y, std::size_t x) { return values[(b * height + y) * width + x]; }
  float at(std::size_t b, std::size_t y, std::size_t x) const { return values[(b * height + y) * width + x]; }
  std::span<const float> band(std::size_t b) const { return {values.data() + b * height * width, height * width}; }
  std::size_t pixels() const { return height * width; }
  bool same_shape(const Raster& other) const {
    return bands == other.bands && height == other.height && width == other.width;
  }

  Tensor to_tensor() const;
  static Raster from_tensor(const Tensor& t, std::uint32_t bit_depth = 11);
  /// Copy with every value clamped to [0, 1].
  Raster clamped() const;
  /// Single-band raster holding one band.
  Raster extract_band(std::size_t b) const;
};

/// Whether load_raster rejects values outside [0, 1].
enum class RangeCheck { kNormalized, kNone };

/// WFRS format: "WFRSv001", four u32 LE (bands, height, width, bit depth),
/// then bands*height*width float32 LE values band-sequential row-major.
void save_raster(const Raster& raster, const std::filesystem::path& path);
Raster load_raster(const std::filesystem::path& path, RangeCheck check = RangeCheck::kNormalized);

inline constexpr std::size_t kRasterHeaderBytes = 24;

}  // namespace wfanet
