// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "json.hpp"
#include "wfanet/raster.hpp"

namespace wfanet {

/// Value reported for bands with zero error.
inline constexpr double kPsnrCap = 100.0;
inline constexpr std::size_t kQualityBlock = 32;

/// Mean over bands of 10 log10(peak^2 / MSE_b), each band capped at kPsnrCap.
double psnr(const Raster& ref, const Raster& test, double peak = 1.0);

struct SamResult {
  double degrees = 0.0;
  std::size_t skipped_pixels = 0;  // pixels where either spectrum has norm < 1e-12
};

/// Mean spectral angle in degrees.
SamResult sam_detailed(const Raster& ref, const Raster& test);
inline double sam(const Raster& ref, const Raster& test) { return sam_detailed(ref, test).degrees; }

/// (100 / ratio) * sqrt(mean_b (RMSE_b / mean(ref_b))^2)
double ergas(const Raster& ref, const Raster& test, std::size_t ratio = 4);

/// Scalar universal image quality index of one window. Returns nullopt for
/// degenerate windows (zero total variance or zero total mean power).
std::optional<double> uqi(std::span<const float> x, std::span<const float> y);

struct QualityResult {
  double value = 0.0;
  std::size_t blocks = 0;
  std::size_t degenerate_blocks = 0;  // contribute 0 to the mean
};

/// Mean scalar UQI over non-overlapping block x block windows of two
/// single-band rasters.
QualityResult uqi_blocks(const Raster& x, const Raster& y, std::size_t block);

/// Hypercomplex quality index over non-overlapping windows. Bands are
/// zero-padded to the next power of two and each pixel becomes a
/// Cayley-Dickson number. Per window,
///   Q = 4 |cov| |m1| |m2| / ((s1^2 + s2^2)(|m1|^2 + |m2|^2))
/// with cov = E[(z1 - m1) conj(z2 - m2)], signed by Re(cov); with one band
/// this is exactly the scalar UQI.
QualityResult q2n(const Raster& ref, const Raster& test, std::size_t block = kQualityBlock);

/// Block size for quality indices computed at the reduced scale.
std::size_t low_resolution_block(std::size_t ratio);

/// 1 - Q2n(degrade(fused), ms).
double d_lambda(const Raster& fused, const Raster& ms, std::size_t ratio, double blur_sigma);

/// Mean over bands of |Q(fused_b, pan) - Q(ms_b, degrade(pan))|.
double d_s(const Raster& fused, const Raster& ms, const Raster& pan, std::size_t ratio, double blur_sigma);

double hqnr(double d_lambda, double d_s);

struct MetricsReport {
  std::optional<double> psnr;
  std::optional<double> sam;
  std::optional<double> ergas;
  std::optional<double> q2n;
  std::optional<double> d_lambda;
  std::optional<double> d_s;
  std::optional<double> hqnr;
  std::size_t q2n_degenerate_blocks = 0;
  std::size_t sam_skipped_pixels = 0;

  /// Flat object; metrics that were not computed are null.
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  bool operator==(const MetricsReport&) const = default;
};

/// PSNR, SAM, ERGAS and Q2n against a reference.
MetricsReport reduced_resolution_report(const Raster& ref, const Raster& test, std::size_t ratio);

/// D_lambda, D_s and HQNR without a reference.
MetricsReport full_resolution_report(const Raster& fused, const Raster& ms, const Raster& pan,
                                     std::size_t ratio, double blur_sigma);

}  // namespace wfanet
