// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <string>

#include "wfanet/params.hpp"
#include "wfanet/rng.hpp"
#include "wfanet/tensor.hpp"

namespace wfanet {

// Small building blocks. Each factory registers its tensors in a ParamStore
// under `prefix` and draws weights from uniform(-a, a), a = sqrt(6 / fan_in).
// Biases start at zero and LayerNorm gains at one.

/// Token-wise affine map: [N x in] -> [N x out].
struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear create(ParamStore& store, const std::string& prefix, std::size_t in,
                       std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& tokens) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  float eps = 1e-5f;

  static LayerNorm create(ParamStore& store, const std::string& prefix, std::size_t width);
  Tensor operator()(const Tensor& tokens) const;
};

/// Two linear layers with a relu in between.
struct Mlp {
  Linear hidden;
  Linear output;

  static Mlp create(ParamStore& store, const std::string& prefix, std::size_t width,
                    std::size_t hidden_width, Rng& rng);
  Tensor operator()(const Tensor& tokens) const;
};

/// 3x3 same-size convolution over [C x H x W].
struct Conv3x3 {
  Tensor weight;  // [out x in x 3 x 3]
  Tensor bias;    // [out]

  static Conv3x3 create(ParamStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

/// Fills `t` from uniform(-a, a) with a = sqrt(6 / fan_in).
void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

}  // namespace wfanet
