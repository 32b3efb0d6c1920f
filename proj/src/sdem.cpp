// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/sdem.hpp"

#include "wfanet/error.hpp"

namespace wfanet {

std::string to_string(DetailBlock kind) { return kind == DetailBlock::kFab ? "fab" : "cb"; }

DetailBlock parse_detail_block(const std::string& name) {
  if (name == "fab") return DetailBlock::kFab;
  if (name == "cb") return DetailBlock::kConv;
  throw ConfigError("unknown detail block '" + name + "' (expected fab or cb)");
}

SdemParams SdemParams::create(ParamStore& store, const std::string& prefix, std::size_t channels,
                              std::size_t blocks_per_band, DetailBlock kind, Rng& rng) {
  if (blocks_per_band == 0) throw ConfigError("sdem: at least one block per band is required");
  SdemParams p;
  p.kind = kind;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string base = prefix + "." + kBandNames[b];
    for (std::size_t i = 0; i < blocks_per_band; ++i) {
      if (kind == DetailBlock::kFab) {
        p.fabs[b].push_back(Linear::create(store, base + ".fab" + std::to_string(i), channels, channels, rng));
      } else {
        p.convs[b].push_back(Conv3x3::create(store, base + ".cb" + std::to_string(i), channels, channels, rng));
      }
    }
  }
  return p;
}

Tensor fab_forward(const Tensor& band, const std::vector<Linear>& fabs) {
  if (band.rank() != 3) throw DimensionError("fab_forward: band must be [C x H x W], got " + shape_to_string(band.shape()));
  if (fabs.empty()) throw ConfigError("fab_forward: empty block stack");
  if (fabs.front().weight.dim(0) != band.dim(0)) {
    throw DimensionError("fab_forward: band has " + std::to_string(band.dim(0)) + " channels, block expects " +
                         std::to_string(fabs.front().weight.dim(0)));
  }
  Tensor tokens = to_tokens(band);
  for (const auto& fab : fabs) tokens = sigmoid(fab(tokens));
  return from_tokens(tokens, band.dim(1), band.dim(2));
}

Tensor conv_block_forward(const Tensor& band, const std::vector<Conv3x3>& convs) {
  if (convs.empty()) throw ConfigError("conv_block_forward: empty block stack");
  Tensor x = band;
  for (const auto& conv : convs) x = relu(conv(x));
  return x;
}

Tensor sdem_forward(const Tensor& pan_features, const SdemParams& params) {
  const auto bands = dwt2(pan_features).as_array();
  std::array<Tensor, 4> details;
  for (std::size_t b = 0; b < 4; ++b) {
    details[b] = params.kind == DetailBlock::kFab ? fab_forward(bands[b], params.fabs[b])
                                                  : conv_block_forward(bands[b], params.convs[b]);
  }
  return idwt2(WaveletBands::from_array(details));
}

}  // namespace wfanet
