// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "wfanet/layers.hpp"
#include "wfanet/wavelet.hpp"

namespace wfanet {

/// Assignment of the triplet members to attention roles.
///
/// The triplet members are indexed 0 = Frequency-Query (per band),
/// 1 = Spatial-Key, 2 = Fusion-Value. kOurs is the identity assignment;
/// kV1..kV5 are the remaining permutations in lexicographic order:
/// V1 = (0,2,1), V2 = (1,0,2), V3 = (1,2,0), V4 = (2,0,1), V5 = (2,1,0).
enum class TripletPermutation { kOurs, kV1, kV2, kV3, kV4, kV5 };

/// {query source, key source, value source}.
std::array<int, 3> permutation_roles(TripletPermutation p);
std::string to_string(TripletPermutation p);
TripletPermutation parse_permutation(const std::string& name);

struct MffaOptions {
  std::size_t channels = 32;
  std::size_t hidden_factor = 2;
  /// false replaces attention by the concat + convolution baseline.
  bool use_attention = true;
  TripletPermutation permutation = TripletPermutation::kOurs;
  /// Spatial-domain query from Conv(P) instead of the four DWT bands.
  bool query_ablation = false;
  /// Key from Conv(P) sampled on the band grid instead of P_LL.
  bool key_ablation = false;
  /// Value from Conv(M) alone instead of the M / P_LL fusion.
  bool value_ablation = false;
};

/// Queries, key and value as token matrices [tokens x C].
struct FrequencyTriplet {
  /// Four per-band queries (ll, lh, hl, hh), or a single spatial-domain
  /// query over the full-resolution grid under query ablation.
  std::vector<Tensor> queries;
  Tensor key;
  Tensor value;
  std::size_t height = 0;  // band grid
  std::size_t width = 0;
};

struct MffaParams {
  MffaOptions options;

  std::vector<LayerNorm> query_norms;
  std::vector<Mlp> query_mlps;
  std::optional<Conv3x3> query_conv;

  LayerNorm key_norm;
  Mlp key_mlp;
  std::optional<Conv3x3> key_conv;

  Conv3x3 value_conv;  // f_v over concat(M, P_LL), or over M alone under value ablation
  LayerNorm value_norm;
  Mlp value_mlp;

  std::vector<Mlp> output_mlps;  // f_I, one per reconstructed band

  std::optional<Conv3x3> fallback_m_conv;
  std::vector<std::array<Conv3x3, 3>> fallback_convs;

  static MffaParams create(ParamStore& store, const std::string& prefix,
                           const MffaOptions& options, Rng& rng);
};

/// Attention maps captured during a forward pass, one per query.
struct MffaTrace {
  std::vector<Tensor> attention_maps;
};

/// softmax(q k^T / sqrt(C)) v. Writes the attention map to `map` when given.
Tensor scaled_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                        Tensor* map = nullptr);

/// P: [C x 2H x 2W] PAN features, M: [C x H x W] MS features.
FrequencyTriplet generate_triplet(const Tensor& pan_features, const Tensor& ms_features,
                                  const MffaParams& params);

/// Per-band attention, f_I = MLP(A) + A, reshaped back to [C x H x W] bands.
WaveletBands attention_reconstruct(const FrequencyTriplet& triplet, const MffaParams& params,
                                   MffaTrace* trace = nullptr);

/// Fused features F_M at the resolution of `pan_features`.
Tensor mffa_forward(const Tensor& pan_features, const Tensor& ms_features,
                    const MffaParams& params, MffaTrace* trace = nullptr);

}  // namespace wfanet
