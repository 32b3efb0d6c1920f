// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <array>
#include <string>
#include <vector>

#include "wfanet/layers.hpp"
#include "wfanet/wavelet.hpp"

namespace wfanet {

/// Per-band feature extractor used by the detail module.
enum class DetailBlock {
  kFab,   // linear map over channels + sigmoid
  kConv,  // 3x3 conv + relu (ablation)
};

std::string to_string(DetailBlock kind);
DetailBlock parse_detail_block(const std::string& name);

struct SdemParams {
  DetailBlock kind = DetailBlock::kFab;
  std::array<std::vector<Linear>, 4> fabs;      // indexed by band (ll, lh, hl, hh)
  std::array<std::vector<Conv3x3>, 4> convs;

  static SdemParams create(ParamStore& store, const std::string& prefix, std::size_t channels,
                           std::size_t blocks_per_band, DetailBlock kind, Rng& rng);
};

/// Applies the FAB stack to one band [C x H x W]; every output lies in (0, 1).
Tensor fab_forward(const Tensor& band, const std::vector<Linear>& fabs);

/// Ablation counterpart of fab_forward.
Tensor conv_block_forward(const Tensor& band, const std::vector<Conv3x3>& convs);

/// F_S = idwt2 of the per-band extractor outputs on dwt2(P).
Tensor sdem_forward(const Tensor& pan_features, const SdemParams& params);

}  // namespace wfanet
