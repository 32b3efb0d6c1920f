// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wfanet/raster.hpp"

namespace wfanet {

/// One supervised sample. Full-resolution samples carry no ground truth.
struct SamplePair {
  Raster pan;               // 1 band at full extent
  Raster lrms;              // B bands at 1/ratio extent
  std::optional<Raster> gt; // B bands at full extent

  std::size_t ratio() const { return pan.height / lrms.height; }
  /// Throws DimensionError when the extents or band counts disagree.
  void validate(std::size_t ratio) const;
};

/// Deterministic synthetic multispectral scene in [0, 1]: a shared smooth
/// luminance field with per-band mixing, random rectangles with band-specific
/// intensities, and light noise.
Raster synth_scene(std::uint64_t seed, std::size_t bands, std::size_t height, std::size_t width);

/// Gaussian standard deviation used by default for a resolution ratio.
double default_blur_sigma(std::size_t ratio);

/// Normalized, truncated 1-D Gaussian kernel (radius ceil(3 sigma)).
std::vector<double> gaussian_kernel(double sigma);

/// Per-band separable Gaussian blur (edge-replicated borders), then keeps
/// every ratio-th pixel starting at offset ratio/2.
Raster wald_degrade(const Raster& image, std::size_t ratio, double blur_sigma);
inline Raster wald_degrade(const Raster& image, std::size_t ratio) {
  return wald_degrade(image, ratio, default_blur_sigma(ratio));
}

/// Pixelwise weighted band sum. Weights are nonnegative and sum to 1.
Raster make_pan(const Raster& image, const std::vector<double>& weights);

/// Synthesizes a ground truth of `bands` x size x size and derives PAN and LRMS.
SamplePair make_sample_pair(std::uint64_t seed, std::size_t bands, std::size_t size, std::size_t ratio);

/// Writes `<root>/<split>/<index>_{pan|lrms|gt}.wfrs`.
void write_dataset(const std::filesystem::path& root, const std::string& split,
                   const std::vector<SamplePair>& samples);
/// Reads every index in `<root>/<split>` in ascending order. Missing gt files
/// yield full-resolution samples.
std::vector<SamplePair> read_dataset(const std::filesystem::path& root, const std::string& split);

}  // namespace wfanet
