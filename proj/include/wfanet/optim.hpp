// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wfanet/tensor.hpp"

namespace wfanet {

struct AdamState {
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::uint64_t step = 0;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  /// Zeroed moments sized for `params`.
  static AdamState for_params(std::span<const Tensor> params);
};

/// One bias-corrected Adam update. `grads[i]` is the gradient of
/// `params[i]`; an empty span is treated as a zero gradient.
void adam_step(std::span<Tensor> params, std::span<const std::span<const float>> grads,
               AdamState& state, float lr);

/// Convenience overload reading each parameter's own grad slot.
void adam_step(std::span<Tensor> params, AdamState& state, float lr);

}  // namespace wfanet
