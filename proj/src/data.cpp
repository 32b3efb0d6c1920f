// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <regex>

#include "wfanet/error.hpp"
#include "wfanet/rng.hpp"

namespace wfanet {

void SamplePair::validate(std::size_t r) const {
  if (pan.bands != 1) throw DimensionError("PAN must have one band, has " + std::to_string(pan.bands));
  if (pan.height != r * lrms.height || pan.width != r * lrms.width) {
    throw DimensionError("PAN " + std::to_string(pan.height) + "x" + std::to_string(pan.width) + " is not " +
                         std::to_string(r) + "x LRMS " + std::to_string(lrms.height) + "x" +
                         std::to_string(lrms.width));
  }
  if (gt) {
    if (gt->bands != lrms.bands) throw DimensionError("GT and LRMS band counts differ");
    if (gt->height != pan.height || gt->width != pan.width) throw DimensionError("GT and PAN extents differ");
  }
}

namespace {

struct Wave {
  double amplitude, fx, fy, phase;
};

std::vector<Wave> random_waves(Rng& rng, int count, double max_cycles) {
  std::vector<Wave> waves;
  for (int i = 0; i < count; ++i) {
    Wave w;
    w.amplitude = rng.uniform(0.2, 1.0) / (i + 1);
    w.fx = rng.uniform(-max_cycles, max_cycles);
    w.fy = rng.uniform(-max_cycles, max_cycles);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    waves.push_back(w);
  }
  return waves;
}

double eval_waves(const std::vector<Wave>& waves, double u, double v) {
  double s = 0.0;
  for (const auto& w : waves) s += w.amplitude * std::cos(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
  return s;
}

}  // namespace

Raster synth_scene(std::uint64_t seed, std::size_t bands, std::size_t height, std::size_t width) {
  if (bands == 0) throw ConfigError("synth_scene: bands must be positive");
  if (height < 8 || width < 8 || height % 2 || width % 2) {
    throw ConfigError("synth_scene: extents must be even and at least 8, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  Rng rng(seed);
  const auto luminance = random_waves(rng, 6, 4.0);
  std::vector<std::vector<Wave>> own;
  std::vector<double> mix;
  for (std::size_t b = 0; b < bands; ++b) {
    own.push_back(random_waves(rng, 3, 3.0));
    mix.push_back(rng.uniform(0.2, 0.6));
  }

  std::vector<double> field(bands * height * width);
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double u = static_cast<double>(x) / width, v = static_cast<double>(y) / height;
        field[(b * height + y) * width + x] = eval_waves(luminance, u, v) + mix[b] * eval_waves(own[b], u, v);
      }

  // Sharp-edged objects give the PAN image real high-frequency content.
  const std::size_t rects = std::max<std::size_t>(4, height * width / 256);
  for (std::size_t i = 0; i < rects; ++i) {
    const std::size_t rh = 2 + rng.below(std::max<std::size_t>(1, height / 4));
    const std::size_t rw = 2 + rng.below(std::max<std::size_t>(1, width / 4));
    const std::size_t y0 = rng.below(height), x0 = rng.below(width);
    const double base = rng.uniform(-0.8, 0.8);
    for (std::size_t b = 0; b < bands; ++b) {
      const double level = base + rng.uniform(-0.4, 0.4);
      for (std::size_t y = y0; y < std::min(height, y0 + rh); ++y)
        for (std::size_t x = x0; x < std::min(width, x0 + rw); ++x) field[(b * height + y) * width + x] += level;
    }
  }
  for (double& v : field) v += 0.02 * rng.normal();

  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double span = std::max(*hi - *lo, 1e-12);
  Raster out(bands, height, width);
  for (std::size_t i = 0; i < field.size(); ++i) {
    out.values[i] = std::clamp(static_cast<float>((field[i] - *lo) / span), 0.0f, 1.0f);
  }
  return out;
}

double default_blur_sigma(std::size_t ratio) { return static_cast<double>(ratio) / 2.0 * 0.85; }

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

Raster wald_degrade(const Raster& image, std::size_t ratio, double blur_sigma) {
  if (ratio == 0) throw ConfigError("wald_degrade: ratio must be positive");
  if (image.height % ratio || image.width % ratio) {
    throw DimensionError("wald_degrade: extents " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                         " are not divisible by ratio " + std::to_string(ratio));
  }
  const auto kernel = gaussian_kernel(blur_sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
  const std::size_t oh = image.height / ratio, ow = image.width / ratio;
  const std::size_t offset = ratio / 2;
  Raster out(image.bands, oh, ow, 0.0f, image.bit_depth);

  // Only the sampled rows and columns are needed.
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (std::size_t b = 0; b < image.bands; ++b) {
    auto plane = image.band(b);
    for (int y = 0; y < h; ++y)
      for (std::size_t j = 0; j < ow; ++j) {
        const int x = static_cast<int>(offset + j * ratio);
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          const int xx = std::clamp(x + t, 0, w - 1);
          acc += kernel[t + radius] * plane[y * w + xx];
        }
        rows[y * ow + j] = acc;
      }
    for (std::size_t i = 0; i < oh; ++i) {
      const int y = static_cast<int>(offset + i * ratio);
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          const int yy = std::clamp(y + t, 0, h - 1);
          acc += kernel[t + radius] * rows[yy * ow + j];
        }
        out.at(b, i, j) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Raster make_pan(const Raster& image, const std::vector<double>& weights) {
  if (weights.size() != image.bands) {
    throw ConfigError("make_pan: " + std::to_string(weights.size()) + " weights for " + std::to_string(image.bands) +
                      " bands");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("make_pan: weights must be nonnegative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-6) throw ConfigError("make_pan: weights sum to " + std::to_string(total) + ", not 1");
  Raster pan(1, image.height, image.width, 0.0f, image.bit_depth);
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    double acc = 0.0;
    for (std::size_t b = 0; b < image.bands; ++b) acc += weights[b] * image.values[b * image.pixels() + i];
    pan.values[i] = static_cast<float>(acc);
  }
  return pan;
}

SamplePair make_sample_pair(std::uint64_t seed, std::size_t bands, std::size_t size, std::size_t ratio) {
  if (ratio == 0 || size % ratio) throw ConfigError("make_sample_pair: size must be a multiple of ratio");
  SamplePair s;
  s.gt = synth_scene(seed, bands, size, size);
  s.lrms = wald_degrade(*s.gt, ratio);
  s.pan = make_pan(*s.gt, std::vector<double>(bands, 1.0 / static_cast<double>(bands)));
  return s;
}

void write_dataset(const std::filesystem::path& root, const std::string& split,
                   const std::vector<SamplePair>& samples) {
  const auto dir = root / split;
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string stem = std::to_string(i);
    save_raster(samples[i].pan, dir / (stem + "_pan.wfrs"));
    save_raster(samples[i].lrms, dir / (stem + "_lrms.wfrs"));
    if (samples[i].gt) save_raster(*samples[i].gt, dir / (stem + "_gt.wfrs"));
  }
}

std::vector<SamplePair> read_dataset(const std::filesystem::path& root, const std::string& split) {
  const auto dir = root / split;
  if (!std::filesystem::is_directory(dir)) throw FormatError("dataset split not found: " + dir.string());
  static const std::regex pattern(R"((\d+)_(pan|lrms|gt)\.wfrs)");
  std::map<std::size_t, std::map<std::string, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, pattern)) files[std::stoul(m[1].str())][m[2].str()] = entry.path();
  }
  std::vector<SamplePair> samples;
  for (const auto& [index, parts] : files) {
    if (!parts.count("pan") || !parts.count("lrms")) {
      throw FormatError("sample " + std::to_string(index) + " in " + dir.string() + " lacks pan or lrms");
    }
    SamplePair s;
    s.pan = load_raster(parts.at("pan"));
    s.lrms = load_raster(parts.at("lrms"));
    if (parts.count("gt")) s.gt = load_raster(parts.at("gt"));
    if (s.pan.height % s.lrms.height) throw DimensionError("sample " + std::to_string(index) + ": non-integer ratio");
    s.validate(s.pan.height / s.lrms.height);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw FormatError("no samples in " + dir.string());
  return samples;
}

}  // namespace wfanet
