// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/mffa.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <cmath>
#include <vector>

#include "wfanet/error.hpp"

namespace wfanet {

std::array<int, 3> permutation_roles(TripletPermutation p) {
  switch (p) {
    case TripletPermutation::kOurs: return {0, 1, 2};
    case TripletPermutation::kV1: return {0, 2, 1};
    case TripletPermutation::kV2: return {1, 0, 2};
    case TripletPermutation::kV3: return {1, 2, 0};
    case TripletPermutation::kV4: return {2, 0, 1};
    case TripletPermutation::kV5: return {2, 1, 0};
  }
  throw ConfigError("unknown triplet permutation");
}

std::string to_string(TripletPermutation p) {
  switch (p) {
    case TripletPermutation::kOurs: return "ours";
    case TripletPermutation::kV1: return "v1";
    case TripletPermutation::kV2: return "v2";
    case TripletPermutation::kV3: return "v3";
    case TripletPermutation::kV4: return "v4";
    case TripletPermutation::kV5: return "v5";
  }
  throw ConfigError("unknown triplet permutation");
}

TripletPermutation parse_permutation(const std::string& name) {
  for (auto p : {TripletPermutation::kOurs, TripletPermutation::kV1, TripletPermutation::kV2,
                 TripletPermutation::kV3, TripletPermutation::kV4, TripletPermutation::kV5}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown triplet permutation '" + name + "' (expected ours, v1..v5)");
}

MffaParams MffaParams::create(ParamStore& store, const std::string& prefix,
                              const MffaOptions& options, Rng& rng) {
  const std::size_t c = options.channels;
  const std::size_t hidden = c * options.hidden_factor;
  if (c == 0 || hidden == 0) throw ConfigError("mffa: channels and hidden width must be positive");
  const bool ablated = options.query_ablation || options.key_ablation || options.value_ablation;
  if (ablated && options.permutation != TripletPermutation::kOurs) {
    throw ConfigError("mffa: triplet ablations are defined only for the default role assignment");
  }
  if (!options.use_attention && (ablated || options.permutation != TripletPermutation::kOurs)) {
    throw ConfigError("mffa: triplet options require the attention path");
  }

  MffaParams p;
  p.options = options;
  if (!options.use_attention) {
    p.fallback_m_conv = Conv3x3::create(store, prefix + ".fallback.m_conv", c, c, rng);
    for (const char* band : kBandNames) {
      const std::string base = prefix + ".fallback." + band;
      p.fallback_convs.push_back({Conv3x3::create(store, base + ".conv0", 2 * c, c, rng),
                                  Conv3x3::create(store, base + ".conv1", c, c, rng),
                                  Conv3x3::create(store, base + ".conv2", c, c, rng)});
    }
    return p;
  }

  if (options.query_ablation) {
    p.query_conv = Conv3x3::create(store, prefix + ".q.spatial.conv", c, c, rng);
    p.query_norms.push_back(LayerNorm::create(store, prefix + ".q.spatial.norm", c));
    p.query_mlps.push_back(Mlp::create(store, prefix + ".q.spatial.mlp", c, hidden, rng));
  } else {
    for (const char* band : kBandNames) {
      const std::string base = prefix + ".q." + band;
      p.query_norms.push_back(LayerNorm::create(store, base + ".norm", c));
      p.query_mlps.push_back(Mlp::create(store, base + ".mlp", c, hidden, rng));
    }
  }

  if (options.key_ablation) p.key_conv = Conv3x3::create(store, prefix + ".k.conv", c, c, rng);
  p.key_norm = LayerNorm::create(store, prefix + ".k.norm", c);
  p.key_mlp = Mlp::create(store, prefix + ".k.mlp", c, hidden, rng);

  if (options.value_ablation) {
    p.value_conv = Conv3x3::create(store, prefix + ".v.conv", c, c, rng);
  } else {
    p.value_conv = Conv3x3::create(store, prefix + ".v.fuse_conv", 2 * c, c, rng);
  }
  p.value_norm = LayerNorm::create(store, prefix + ".v.norm", c);
  p.value_mlp = Mlp::create(store, prefix + ".v.mlp", c, hidden, rng);

  if (options.query_ablation) {
    p.output_mlps.push_back(Mlp::create(store, prefix + ".out.spatial.mlp", c, hidden, rng));
  } else {
    for (const char* band : kBandNames) {
      p.output_mlps.push_back(Mlp::create(store, prefix + ".out." + band + ".mlp", c, hidden, rng));
    }
  }
  return p;
}

namespace {

std::vector<float> transposed_copy(std::span<const float> src, std::size_t rows, std::size_t cols) {
  std::vector<float> dst(src.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  return dst;
}

// Cephes-style expf for x <= 0, branch-free so the softmax loops vectorize.
// Relative error stays within a few ulp. Arguments below -87 are clamped
// through the sign-magnitude bit pattern, which orders negative floats.
inline float exp_nonpositive(float x) {
  x = std::bit_cast<float>(std::min(std::bit_cast<std::uint32_t>(x), 0xC2AE0000u));
  // Adding and removing 1.5 * 2^23 rounds to the nearest integer.
  const float n = (x * 1.44269504088896341f + 12582912.0f) - 12582912.0f;
  const float r = (x - n * 0.693359375f) + n * 2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = p * r * r + r + 1.0f;
  const std::int32_t bits = (static_cast<std::int32_t>(n) + 127) << 23;
  return p * std::bit_cast<float>(bits);
}

// Reductions below let the compiler pick a fixed vector summation order.
inline float lane_sum(const float* x, std::size_t n) {
  float total = 0.0f;
#pragma omp simd reduction(+ : total)
  for (std::size_t j = 0; j < n; ++j) total += x[j];
  return total;
}

// Maximum via an order-preserving integer key, so the loop vectorizes.
inline float row_max(const float* x, std::size_t n) {
  std::int32_t best = std::numeric_limits<std::int32_t>::min();
  for (std::size_t j = 0; j < n; ++j) {
    const auto bits = std::bit_cast<std::int32_t>(x[j]);
    best = std::max(best, bits ^ ((bits >> 31) & 0x7FFFFFFF));
  }
  return std::bit_cast<float>(best ^ ((best >> 31) & 0x7FFFFFFF));
}

inline float lane_dot(const float* x, const float* y, std::size_t n) {
  float total = 0.0f;
#pragma omp simd reduction(+ : total)
  for (std::size_t j = 0; j < n; ++j) total += x[j] * y[j];
  return total;
}

}  // namespace

Tensor scaled_attention(const Tensor& query, const Tensor& key, const Tensor& value, Tensor* map) {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) {
    throw DimensionError("attention: query, key and value must be token matrices");
  }
  if (query.dim(1) != key.dim(1)) {
    throw DimensionError("attention: query " + shape_to_string(query.shape()) + " and key " +
                         shape_to_string(key.shape()) + " differ in feature width");
  }
  if (key.dim(0) != value.dim(0)) {
    throw DimensionError("attention: key " + shape_to_string(key.shape()) + " and value " +
                         shape_to_string(value.shape()) + " differ in token count");
  }
  const std::size_t nq = query.dim(0), nk = key.dim(0), c = query.dim(1), cv = value.dim(1);
  const float temperature = 1.0f / std::sqrt(static_cast<float>(c));
  const std::vector<float> key_t = transposed_copy(key.data(), nk, c);
  const std::vector<float> value_t = transposed_copy(value.data(), nk, cv);

  Tensor weights(Shape{nq, nk});
  Tensor out(Shape{nq, cv});
  {
    auto q = query.data();
    auto w = weights.mutable_data();
    auto o = out.mutable_data();
    for (std::size_t i = 0; i < nq; ++i) {
      float* row = w.data() + i * nk;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const float qv = q[i * c + ch] * temperature;
        const float* kt = key_t.data() + ch * nk;
        for (std::size_t j = 0; j < nk; ++j) row[j] += qv * kt[j];
      }
      const float peak = row_max(row, nk);
      for (std::size_t j = 0; j < nk; ++j) row[j] = exp_nonpositive(row[j] - peak);
      const float inv = 1.0f / lane_sum(row, nk);
      for (std::size_t j = 0; j < nk; ++j) row[j] *= inv;
      float* orow = o.data() + i * cv;
      for (std::size_t ch = 0; ch < cv; ++ch) orow[ch] = lane_dot(row, value_t.data() + ch * nk, nk);
    }
  }
  if (map) *map = weights;

  if (ops::should_record({&query, &key, &value})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [query, key, value, weights, out, key_t, value_t, nq, nk, c, cv,
                                 temperature]() {
      auto g = out.grad();
      auto q = query.data();
      auto p = weights.data();
      std::vector<float> d_key_t(c * nk, 0.0f);
      std::vector<float> d_value_t(cv * nk, 0.0f);
      std::vector<float> ds(nk), prod(nk);
      std::span<float> dq;
      if (query.requires_grad()) dq = query.mutable_grad();
      for (std::size_t i = 0; i < nq; ++i) {
        const float* prow = p.data() + i * nk;
        const float* grow = g.data() + i * cv;
        std::fill(ds.begin(), ds.end(), 0.0f);
        for (std::size_t ch = 0; ch < cv; ++ch) {
          const float gv = grow[ch];
          const float* vt = value_t.data() + ch * nk;
          float* dvt = d_value_t.data() + ch * nk;
          for (std::size_t j = 0; j < nk; ++j) {
            ds[j] += gv * vt[j];
            dvt[j] += gv * prow[j];
          }
        }
        for (std::size_t j = 0; j < nk; ++j) prod[j] = ds[j] * prow[j];
        const float rf = lane_sum(prod.data(), nk);
        for (std::size_t j = 0; j < nk; ++j) ds[j] = prow[j] * (ds[j] - rf) * temperature;
        if (!dq.empty()) {
          for (std::size_t ch = 0; ch < c; ++ch) dq[i * c + ch] += lane_dot(ds.data(), key_t.data() + ch * nk, nk);
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
          const float qv = q[i * c + ch];
          float* dkt = d_key_t.data() + ch * nk;
          for (std::size_t j = 0; j < nk; ++j) dkt[j] += qv * ds[j];
        }
      }
      if (key.requires_grad()) {
        auto dk = key.mutable_grad();
        for (std::size_t j = 0; j < nk; ++j)
          for (std::size_t ch = 0; ch < c; ++ch) dk[j * c + ch] += d_key_t[ch * nk + j];
      }
      if (value.requires_grad()) {
        auto dv = value.mutable_grad();
        for (std::size_t j = 0; j < nk; ++j)
          for (std::size_t ch = 0; ch < cv; ++ch) dv[j * cv + ch] += d_value_t[ch * nk + j];
      }
    });
  }
  ops::check_finite(out, "attention");
  return out;
}

namespace {

void check_pair(const Tensor& pan_features, const Tensor& ms_features, std::size_t channels) {
  if (pan_features.rank() != 3 || ms_features.rank() != 3) {
    throw DimensionError("mffa: inputs must be [C x H x W], got " + shape_to_string(pan_features.shape()) +
                         " and " + shape_to_string(ms_features.shape()));
  }
  if (pan_features.dim(0) != channels || ms_features.dim(0) != channels) {
    throw DimensionError("mffa: expected " + std::to_string(channels) + " channels, got " +
                         shape_to_string(pan_features.shape()) + " and " + shape_to_string(ms_features.shape()));
  }
  if (pan_features.dim(1) != 2 * ms_features.dim(1) || pan_features.dim(2) != 2 * ms_features.dim(2)) {
    throw DimensionError("mffa: PAN features " + shape_to_string(pan_features.shape()) +
                         " must be exactly twice the extent of MS features " +
                         shape_to_string(ms_features.shape()));
  }
}

Tensor embed(const Tensor& features, const LayerNorm& norm, const Mlp& mlp) {
  return mlp(norm(to_tokens(features)));
}

Tensor fallback_forward(const Tensor& pan_features, const Tensor& ms_features, const MffaParams& params) {
  const WaveletBands bands = dwt2(pan_features);
  const Tensor m = (*params.fallback_m_conv)(ms_features);
  const auto arr = bands.as_array();
  std::array<Tensor, 4> fused;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& convs = params.fallback_convs[i];
    Tensor x = concat_channels({m, arr[i]});
    x = relu(convs[0](x));
    x = relu(convs[1](x));
    fused[i] = convs[2](x);
  }
  return idwt2(WaveletBands::from_array(fused));
}

}  // namespace

FrequencyTriplet generate_triplet(const Tensor& pan_features, const Tensor& ms_features,
                                  const MffaParams& params) {
  const auto& opt = params.options;
  if (!opt.use_attention) throw ContractError("generate_triplet: block was built without attention");
  check_pair(pan_features, ms_features, opt.channels);

  const WaveletBands bands = dwt2(pan_features);
  FrequencyTriplet t;
  t.height = ms_features.dim(1);
  t.width = ms_features.dim(2);

  if (opt.query_ablation) {
    t.queries.push_back(embed((*params.query_conv)(pan_features), params.query_norms[0], params.query_mlps[0]));
  } else {
    const auto arr = bands.as_array();
    for (std::size_t i = 0; i < 4; ++i) t.queries.push_back(embed(arr[i], params.query_norms[i], params.query_mlps[i]));
  }

  const Tensor key_source = opt.key_ablation ? subsample2((*params.key_conv)(pan_features)) : bands.ll;
  t.key = embed(key_source, params.key_norm, params.key_mlp);

  const Tensor value_source = opt.value_ablation ? params.value_conv(ms_features)
                                                 : params.value_conv(concat_channels({ms_features, bands.ll}));
  t.value = embed(value_source, params.value_norm, params.value_mlp);
  return t;
}

WaveletBands attention_reconstruct(const FrequencyTriplet& triplet, const MffaParams& params,
                                   MffaTrace* trace) {
  if (triplet.queries.size() != 4) {
    throw ContractError("attention_reconstruct: expected four per-band queries, got " +
                        std::to_string(triplet.queries.size()));
  }
  const std::size_t n = triplet.height * triplet.width;
  const std::size_t c = params.options.channels;
  auto check = [&](const Tensor& t, const char* what) {
    if (t.rank() != 2 || t.dim(0) != n || t.dim(1) != c) {
      throw DimensionError(std::string("attention_reconstruct: ") + what + " is " + shape_to_string(t.shape()) +
                           ", expected [" + std::to_string(n) + " x " + std::to_string(c) + "]");
    }
  };
  for (const auto& q : triplet.queries) check(q, "query");
  check(triplet.key, "key");
  check(triplet.value, "value");

  const auto roles = permutation_roles(params.options.permutation);
  std::array<Tensor, 4> reconstructed;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::array<Tensor, 3> members = {triplet.queries[i], triplet.key, triplet.value};
    Tensor map;
    Tensor attended = scaled_attention(members[roles[0]], members[roles[1]], members[roles[2]], &map);
    if (trace) trace->attention_maps.push_back(map);
    Tensor fused = add(params.output_mlps[i](attended), attended);
    reconstructed[i] = from_tokens(fused, triplet.height, triplet.width);
  }
  return WaveletBands::from_array(reconstructed);
}

Tensor mffa_forward(const Tensor& pan_features, const Tensor& ms_features, const MffaParams& params,
                    MffaTrace* trace) {
  if (!params.options.use_attention) {
    check_pair(pan_features, ms_features, params.options.channels);
    return fallback_forward(pan_features, ms_features, params);
  }
  const FrequencyTriplet triplet = generate_triplet(pan_features, ms_features, params);
  if (params.options.query_ablation) {
    // Spatial-domain query: attention runs on the full grid, no IDWT.
    Tensor map;
    Tensor attended = scaled_attention(triplet.queries[0], triplet.key, triplet.value, &map);
    if (trace) trace->attention_maps.push_back(map);
    Tensor fused = add(params.output_mlps[0](attended), attended);
    return from_tokens(fused, pan_features.dim(1), pan_features.dim(2));
  }
  return idwt2(attention_reconstruct(triplet, params, trace));
}

}  // namespace wfanet
