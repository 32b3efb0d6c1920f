// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "wfanet/data.hpp"
#include "wfanet/error.hpp"

namespace wfanet {

namespace {

void require_same_shape(const Raster& a, const Raster& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.bands) + "x" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.bands) + "x" + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

// Cayley-Dickson arithmetic on 2^m-dimensional numbers stored as doubles.
using Hyper = std::vector<double>;

Hyper conj(Hyper v) {
  for (std::size_t i = 1; i < v.size(); ++i) v[i] = -v[i];
  return v;
}

// (a, b)(c, d) = (ac - conj(d) b, d a + b conj(c))
Hyper hyper_mul(const Hyper& x, const Hyper& y) {
  const std::size_t n = x.size();
  if (n == 1) return {x[0] * y[0]};
  const std::size_t h = n / 2;
  const Hyper a(x.begin(), x.begin() + h), b(x.begin() + h, x.end());
  const Hyper c(y.begin(), y.begin() + h), d(y.begin() + h, y.end());
  const Hyper ac = hyper_mul(a, c);
  const Hyper db = hyper_mul(conj(d), b);
  const Hyper da = hyper_mul(d, a);
  const Hyper bc = hyper_mul(b, conj(c));
  Hyper out(n);
  for (std::size_t i = 0; i < h; ++i) {
    out[i] = ac[i] - db[i];
    out[h + i] = da[i] + bc[i];
  }
  return out;
}

double norm_sq(const Hyper& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Signed hypercomplex quality of one window; nullopt when degenerate.
std::optional<double> hyper_quality(const std::vector<Hyper>& z1, const std::vector<Hyper>& z2) {
  const std::size_t dims = z1.front().size();
  const double count = static_cast<double>(z1.size());
  Hyper m1(dims, 0.0), m2(dims, 0.0);
  for (std::size_t p = 0; p < z1.size(); ++p)
    for (std::size_t k = 0; k < dims; ++k) {
      m1[k] += z1[p][k];
      m2[k] += z2[p][k];
    }
  for (std::size_t k = 0; k < dims; ++k) {
    m1[k] /= count;
    m2[k] /= count;
  }
  Hyper cov(dims, 0.0);
  double var1 = 0.0, var2 = 0.0;
  Hyper d1(dims), d2(dims);
  for (std::size_t p = 0; p < z1.size(); ++p) {
    for (std::size_t k = 0; k < dims; ++k) {
      d1[k] = z1[p][k] - m1[k];
      d2[k] = z2[p][k] - m2[k];
    }
    var1 += norm_sq(d1);
    var2 += norm_sq(d2);
    const Hyper prod = dims == 1 ? Hyper{d1[0] * d2[0]} : hyper_mul(d1, conj(d2));
    for (std::size_t k = 0; k < dims; ++k) cov[k] += prod[k];
  }
  for (double& v : cov) v /= count;
  var1 /= count;
  var2 /= count;
  const double mean_power = norm_sq(m1) + norm_sq(m2);
  if (var1 + var2 <= 0.0 || mean_power <= 0.0) return std::nullopt;
  const double magnitude = std::sqrt(norm_sq(cov));
  const double signed_cov = cov[0] < 0.0 ? -magnitude : magnitude;
  return 4.0 * signed_cov * std::sqrt(norm_sq(m1)) * std::sqrt(norm_sq(m2)) / ((var1 + var2) * mean_power);
}

void require_block_fits(const Raster& r, std::size_t block, const char* what) {
  if (block == 0) throw ConfigError(std::string(what) + ": block size must be positive");
  if (r.height < block || r.width < block) {
    throw DimensionError(std::string(what) + ": extents " + std::to_string(r.height) + "x" + std::to_string(r.width) +
                         " are smaller than the " + std::to_string(block) + "-pixel block");
  }
}

}  // namespace

double psnr(const Raster& ref, const Raster& test, double peak) {
  require_same_shape(ref, test, "psnr");
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  double total = 0.0;
  for (std::size_t b = 0; b < ref.bands; ++b) {
    auto x = ref.band(b);
    auto y = test.band(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(x[i]) - y[i];
      mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    total += mse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
  }
  return total / static_cast<double>(ref.bands);
}

SamResult sam_detailed(const Raster& ref, const Raster& test) {
  require_same_shape(ref, test, "sam");
  if (ref.bands < 2) throw DimensionError("sam: at least two bands are required");
  const std::size_t n = ref.pixels();
  SamResult result;
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<double> u(ref.bands), v(ref.bands);
  for (std::size_t p = 0; p < n; ++p) {
    double nu = 0.0, nv = 0.0;
    for (std::size_t b = 0; b < ref.bands; ++b) {
      u[b] = ref.values[b * n + p];
      v[b] = test.values[b * n + p];
      nu += u[b] * u[b];
      nv += v[b] * v[b];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    if (nu < 1e-12 || nv < 1e-12) {
      ++result.skipped_pixels;
      continue;
    }
    // Angle between unit vectors as 2 atan2(|u - v|, |u + v|); exact zero for
    // identical spectra and well conditioned near 0 and 180 degrees.
    double diff = 0.0, plus = 0.0;
    for (std::size_t b = 0; b < ref.bands; ++b) {
      const double a = u[b] / nu, c = v[b] / nv;
      diff += (a - c) * (a - c);
      plus += (a + c) * (a + c);
    }
    total += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(plus));
    ++counted;
  }
  if (counted == 0) throw NumericError("sam: every pixel has a degenerate spectrum");
  result.degrees = total / static_cast<double>(counted) * 180.0 / std::numbers::pi;
  return result;
}

double ergas(const Raster& ref, const Raster& test, std::size_t ratio) {
  require_same_shape(ref, test, "ergas");
  if (ratio == 0) throw ConfigError("ergas: ratio must be positive");
  double acc = 0.0;
  for (std::size_t b = 0; b < ref.bands; ++b) {
    auto x = ref.band(b);
    auto y = test.band(b);
    double mu = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mu += x[i];
      const double d = static_cast<double>(x[i]) - y[i];
      mse += d * d;
    }
    mu /= static_cast<double>(x.size());
    mse /= static_cast<double>(x.size());
    if (mu == 0.0) throw NumericError("ergas: reference band " + std::to_string(b) + " has zero mean");
    acc += mse / (mu * mu);
  }
  return 100.0 / static_cast<double>(ratio) * std::sqrt(acc / static_cast<double>(ref.bands));
}

std::optional<double> uqi(std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size() || x.empty()) throw DimensionError("uqi: windows must be nonempty and equal-sized");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  vx /= n;
  vy /= n;
  cxy /= n;
  if (vx + vy <= 0.0 || mx * mx + my * my <= 0.0) return std::nullopt;
  return 4.0 * cxy * mx * my / ((vx + vy) * (mx * mx + my * my));
}

QualityResult uqi_blocks(const Raster& x, const Raster& y, std::size_t block) {
  require_same_shape(x, y, "uqi_blocks");
  if (x.bands != 1) throw DimensionError("uqi_blocks: single-band rasters expected");
  require_block_fits(x, block, "uqi_blocks");
  QualityResult result;
  std::vector<float> wx(block * block), wy(block * block);
  double total = 0.0;
  for (std::size_t by = 0; by + block <= x.height; by += block)
    for (std::size_t bx = 0; bx + block <= x.width; bx += block) {
      for (std::size_t i = 0; i < block; ++i)
        for (std::size_t j = 0; j < block; ++j) {
          wx[i * block + j] = x.at(0, by + i, bx + j);
          wy[i * block + j] = y.at(0, by + i, bx + j);
        }
      ++result.blocks;
      if (auto q = uqi(wx, wy)) {
        total += *q;
      } else {
        ++result.degenerate_blocks;
      }
    }
  result.value = total / static_cast<double>(result.blocks);
  return result;
}

QualityResult q2n(const Raster& ref, const Raster& test, std::size_t block) {
  require_same_shape(ref, test, "q2n");
  require_block_fits(ref, block, "q2n");
  const std::size_t dims = next_pow2(ref.bands);
  const std::size_t n = ref.pixels();
  QualityResult result;
  double total = 0.0;
  std::vector<Hyper> z1(block * block, Hyper(dims, 0.0)), z2(block * block, Hyper(dims, 0.0));
  for (std::size_t by = 0; by + block <= ref.height; by += block)
    for (std::size_t bx = 0; bx + block <= ref.width; bx += block) {
      for (std::size_t i = 0; i < block; ++i)
        for (std::size_t j = 0; j < block; ++j) {
          const std::size_t p = (by + i) * ref.width + bx + j;
          for (std::size_t b = 0; b < ref.bands; ++b) {
            z1[i * block + j][b] = ref.values[b * n + p];
            z2[i * block + j][b] = test.values[b * n + p];
          }
        }
      ++result.blocks;
      if (auto q = hyper_quality(z1, z2)) {
        total += *q;
      } else {
        ++result.degenerate_blocks;
      }
    }
  result.value = total / static_cast<double>(result.blocks);
  return result;
}

std::size_t low_resolution_block(std::size_t ratio) {
  return std::max<std::size_t>(4, kQualityBlock / std::max<std::size_t>(ratio, 1));
}

double d_lambda(const Raster& fused, const Raster& ms, std::size_t ratio, double blur_sigma) {
  if (fused.bands != ms.bands || fused.height != ratio * ms.height || fused.width != ratio * ms.width) {
    throw DimensionError("d_lambda: fused image must be " + std::to_string(ratio) + "x the MS extent with equal bands");
  }
  const Raster degraded = wald_degrade(fused, ratio, blur_sigma);
  return 1.0 - q2n(degraded, ms, low_resolution_block(ratio)).value;
}

double d_s(const Raster& fused, const Raster& ms, const Raster& pan, std::size_t ratio, double blur_sigma) {
  if (pan.bands != 1) throw DimensionError("d_s: PAN must have one band");
  if (fused.height != pan.height || fused.width != pan.width) throw DimensionError("d_s: fused and PAN extents differ");
  if (fused.bands != ms.bands || fused.height != ratio * ms.height || fused.width != ratio * ms.width) {
    throw DimensionError("d_s: MS must be 1/" + std::to_string(ratio) + " of the fused extent with equal bands");
  }
  const Raster pan_low = wald_degrade(pan, ratio, blur_sigma);
  const std::size_t low_block = low_resolution_block(ratio);
  double acc = 0.0;
  for (std::size_t b = 0; b < fused.bands; ++b) {
    const double high = uqi_blocks(fused.extract_band(b), pan, kQualityBlock).value;
    const double low = uqi_blocks(ms.extract_band(b), pan_low, low_block).value;
    acc += std::fabs(high - low);
  }
  return acc / static_cast<double>(fused.bands);
}

double hqnr(double d_lambda_value, double d_s_value) { return (1.0 - d_lambda_value) * (1.0 - d_s_value); }

nlohmann::json MetricsReport::to_json() const {
  auto field = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"psnr", field(psnr)},
          {"sam", field(sam)},
          {"ergas", field(ergas)},
          {"q2n", field(q2n)},
          {"d_lambda", field(d_lambda)},
          {"d_s", field(d_s)},
          {"hqnr", field(hqnr)},
          {"q2n_degenerate_blocks", q2n_degenerate_blocks},
          {"sam_skipped_pixels", sam_skipped_pixels}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  auto field = [&j](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  MetricsReport r;
  r.psnr = field("psnr");
  r.sam = field("sam");
  r.ergas = field("ergas");
  r.q2n = field("q2n");
  r.d_lambda = field("d_lambda");
  r.d_s = field("d_s");
  r.hqnr = field("hqnr");
  r.q2n_degenerate_blocks = j.value("q2n_degenerate_blocks", std::size_t{0});
  r.sam_skipped_pixels = j.value("sam_skipped_pixels", std::size_t{0});
  return r;
}

MetricsReport reduced_resolution_report(const Raster& ref, const Raster& test, std::size_t ratio) {
  MetricsReport r;
  r.psnr = psnr(ref, test);
  const SamResult s = sam_detailed(ref, test);
  r.sam = s.degrees;
  r.sam_skipped_pixels = s.skipped_pixels;
  r.ergas = ergas(ref, test, ratio);
  const QualityResult q = q2n(ref, test, std::min({kQualityBlock, ref.height, ref.width}));
  r.q2n = q.value;
  r.q2n_degenerate_blocks = q.degenerate_blocks;
  return r;
}

MetricsReport full_resolution_report(const Raster& fused, const Raster& ms, const Raster& pan,
                                     std::size_t ratio, double blur_sigma) {
  MetricsReport r;
  r.d_lambda = d_lambda(fused, ms, ratio, blur_sigma);
  r.d_s = d_s(fused, ms, pan, ratio, blur_sigma);
  r.hqnr = hqnr(*r.d_lambda, *r.d_s);
  return r;
}

}  // namespace wfanet
