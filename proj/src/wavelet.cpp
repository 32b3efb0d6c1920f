// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/wavelet.hpp"

#include <string>

#include "wfanet/error.hpp"

namespace wfanet {

WaveletBands dwt2(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("dwt2: input must be [C x H x W], got " + shape_to_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0) throw DimensionError("dwt2: height " + std::to_string(h) + " is odd");
  if (w % 2 != 0) throw DimensionError("dwt2: width " + std::to_string(w) + " is odd");
  const std::size_t oh = h / 2, ow = w / 2;
  const Shape band_shape{c, oh, ow};
  std::array<Tensor, 4> out = {Tensor(band_shape), Tensor(band_shape), Tensor(band_shape),
                               Tensor(band_shape)};
  auto xv = x.data();
  auto ll = out[0].mutable_data();
  auto lh = out[1].mutable_data();
  auto hl = out[2].mutable_data();
  auto hh = out[3].mutable_data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      const float* top = xv.data() + (ch * h + 2 * y) * w;
      const float* bottom = top + w;
      const std::size_t base = (ch * oh + y) * ow;
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const float a11 = top[2 * xx], a12 = top[2 * xx + 1];
        const float a21 = bottom[2 * xx], a22 = bottom[2 * xx + 1];
        ll[base + xx] = (a11 + a12 + a21 + a22) * 0.25f;
        lh[base + xx] = (a11 + a12 - a21 - a22) * 0.25f;
        hl[base + xx] = (a11 - a12 + a21 - a22) * 0.25f;
        hh[base + xx] = (a11 - a12 - a21 + a22) * 0.25f;
      }
    }
  }
  if (ops::should_record({&x})) {
    for (auto& band : out) band.set_requires_grad(true);
    active_tape().record({out[0], out[1], out[2], out[3]}, [x, out, c, h, w, oh, ow]() mutable {
      // The transpose of the analysis operator: each block input gathers
      // its band gradients with the same signs, scaled by 1/4.
      auto gx = x.mutable_grad();
      const std::vector<float> zeros(out[0].numel(), 0.0f);
      auto grad_of = [&](const Tensor& t) { return t.has_grad() ? t.grad() : std::span<const float>(zeros); };
      auto gll = grad_of(out[0]);
      auto glh = grad_of(out[1]);
      auto ghl = grad_of(out[2]);
      auto ghh = grad_of(out[3]);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y) {
          float* top = gx.data() + (ch * h + 2 * y) * w;
          float* bottom = top + w;
          const std::size_t base = (ch * oh + y) * ow;
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const float a = gll[base + xx], b = glh[base + xx], cc = ghl[base + xx], d = ghh[base + xx];
            top[2 * xx] += 0.25f * (a + b + cc + d);
            top[2 * xx + 1] += 0.25f * (a + b - cc - d);
            bottom[2 * xx] += 0.25f * (a - b + cc - d);
            bottom[2 * xx + 1] += 0.25f * (a - b - cc + d);
          }
        }
    });
  }
  for (const auto& band : out) ops::check_finite(band, "dwt2");
  return WaveletBands::from_array(out);
}

Tensor idwt2(const WaveletBands& bands) {
  const auto arr = bands.as_array();
  for (std::size_t i = 0; i < 4; ++i) {
    if (!arr[i].defined()) throw DimensionError(std::string("idwt2: band ") + kBandNames[i] + " is missing");
    if (arr[i].rank() != 3) {
      throw DimensionError(std::string("idwt2: band ") + kBandNames[i] + " must be [C x H x W], got " +
                           shape_to_string(arr[i].shape()));
    }
    if (arr[i].shape() != arr[0].shape()) {
      throw DimensionError(std::string("idwt2: band ") + kBandNames[i] + " has shape " +
                           shape_to_string(arr[i].shape()) + " but ll has " + shape_to_string(arr[0].shape()));
    }
  }
  const std::size_t c = arr[0].dim(0), oh = arr[0].dim(1), ow = arr[0].dim(2);
  const std::size_t h = 2 * oh, w = 2 * ow;
  Tensor out(Shape{c, h, w});
  auto o = out.mutable_data();
  auto ll = arr[0].data();
  auto lh = arr[1].data();
  auto hl = arr[2].data();
  auto hh = arr[3].data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y) {
      float* top = o.data() + (ch * h + 2 * y) * w;
      float* bottom = top + w;
      const std::size_t base = (ch * oh + y) * ow;
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const float a = ll[base + xx], b = lh[base + xx], cc = hl[base + xx], d = hh[base + xx];
        top[2 * xx] = a + b + cc + d;
        top[2 * xx + 1] = a + b - cc - d;
        bottom[2 * xx] = a - b + cc - d;
        bottom[2 * xx + 1] = a - b - cc + d;
      }
    }
  if (ops::should_record({&arr[0], &arr[1], &arr[2], &arr[3]})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [arr, out, c, h, w, oh, ow]() mutable {
      auto g = out.grad();
      std::array<std::vector<float>, 4> gb;
      for (auto& v : gb) v.assign(c * oh * ow, 0.0f);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y) {
          const float* top = g.data() + (ch * h + 2 * y) * w;
          const float* bottom = top + w;
          const std::size_t base = (ch * oh + y) * ow;
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const float a11 = top[2 * xx], a12 = top[2 * xx + 1];
            const float a21 = bottom[2 * xx], a22 = bottom[2 * xx + 1];
            gb[0][base + xx] = a11 + a12 + a21 + a22;
            gb[1][base + xx] = a11 + a12 - a21 - a22;
            gb[2][base + xx] = a11 - a12 + a21 - a22;
            gb[3][base + xx] = a11 - a12 - a21 + a22;
          }
        }
      for (std::size_t i = 0; i < 4; ++i)
        if (arr[i].requires_grad()) arr[i].accumulate_grad(gb[i]);
    });
  }
  ops::check_finite(out, "idwt2");
  return out;
}

WaveletPyramid build_pyramid(const Tensor& x, std::size_t levels) {
  if (levels == 0) throw DimensionError("build_pyramid: at least one level is required");
  if (x.rank() != 3) throw DimensionError("build_pyramid: input must be [C x H x W], got " + shape_to_string(x.shape()));
  const std::size_t divisor = std::size_t{1} << (levels - 1);
  if (x.dim(1) % divisor != 0 || x.dim(2) % divisor != 0) {
    std::size_t feasible = 1;
    while (x.dim(1) % (std::size_t{1} << feasible) == 0 && x.dim(2) % (std::size_t{1} << feasible) == 0) ++feasible;
    throw DimensionError("build_pyramid: " + shape_to_string(x.shape()) + " supports at most " +
                         std::to_string(feasible) + " levels, requested " + std::to_string(levels));
  }
  WaveletPyramid pyramid;
  pyramid.levels.resize(levels);
  pyramid.levels[levels - 1] = x;
  for (std::size_t k = levels - 1; k > 0; --k) pyramid.levels[k - 1] = dwt2(pyramid.levels[k]).ll;
  return pyramid;
}

}  // namespace wfanet
