// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/optim.hpp"

#include <cmath>
#include <string>

#include "wfanet/error.hpp"

namespace wfanet {

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0f);
    state.second_moment.emplace_back(p.numel(), 0.0f);
  }
  return state;
}

void adam_step(std::span<Tensor> params, std::span<const std::span<const float>> grads,
               AdamState& state, float lr) {
  if (!(lr > 0.0f)) throw ConfigError("adam_step: learning rate must be positive");
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.first_moment.size()) + " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].numel();
    if (state.first_moment[i].size() != n || state.second_moment[i].size() != n ||
        (!grads[i].empty() && grads[i].size() != n)) {
      throw DimensionError("adam_step: buffer size mismatch for parameter " + std::to_string(i) + " " +
                           shape_to_string(params[i].shape()));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta2), t));
  const float b1 = state.beta1, b2 = state.beta2;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto w = params[i].mutable_data();
    for (std::size_t j = 0; j < m.size(); ++j) {
      const float gj = g.empty() ? 0.0f : g[j];
      m[j] = b1 * m[j] + (1.0f - b1) * gj;
      v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
      const float mhat = m[j] / correction1;
      const float vhat = v[j] / correction2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void adam_step(std::span<Tensor> params, AdamState& state, float lr) {
  std::vector<std::span<const float>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.grad());
  adam_step(params, grads, state, lr);
}

}  // namespace wfanet
