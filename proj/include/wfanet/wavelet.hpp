// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "wfanet/tensor.hpp"

namespace wfanet {

/// One level of a 2-D Haar decomposition. Every band is [C x H/2 x W/2].
struct WaveletBands {
  Tensor ll;  // block mean
  Tensor lh;  // horizontal detail (top rows minus bottom rows)
  Tensor hl;  // vertical detail (left columns minus right columns)
  Tensor hh;  // diagonal detail

  std::array<Tensor, 4> as_array() const { return {ll, lh, hl, hh}; }
  static WaveletBands from_array(const std::array<Tensor, 4>& bands) {
    return {bands[0], bands[1], bands[2], bands[3]};
  }
};

inline constexpr std::array<const char*, 4> kBandNames = {"ll", "lh", "hl", "hh"};

/// Haar analysis with 1/4 normalization on every 2x2 block
///   a11 a12
///   a21 a22
/// LL = (a11+a12+a21+a22)/4   LH = (a11+a12-a21-a22)/4
/// HL = (a11-a12+a21-a22)/4   HH = (a11-a12-a21+a22)/4
///
/// Throws DimensionError for odd extents.
WaveletBands dwt2(const Tensor& x);

/// Exact inverse of dwt2.
Tensor idwt2(const WaveletBands& bands);

/// Levels ordered smallest first: levels.back() is the input itself and each
/// earlier level is the LL band of the one after it.
struct WaveletPyramid {
  std::vector<Tensor> levels;

  std::size_t size() const { return levels.size(); }
  const Tensor& operator[](std::size_t k) const { return levels.at(k); }
};

WaveletPyramid build_pyramid(const Tensor& x, std::size_t levels);

}  // namespace wfanet
