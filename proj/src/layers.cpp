// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/layers.hpp"

#include <cmath>

namespace wfanet {

void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.uniform(-a, a));
}

Linear Linear::create(ParamStore& store, const std::string& prefix, std::size_t in,
                      std::size_t out, Rng& rng) {
  Linear l;
  l.weight = store.add(prefix + ".weight", Tensor(Shape{in, out}));
  init_uniform(l.weight, in, rng);
  l.bias = store.add(prefix + ".bias", Tensor(Shape{out}));
  return l;
}

Tensor Linear::operator()(const Tensor& tokens) const {
  return add_row_bias(matmul(tokens, weight), bias);
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& prefix, std::size_t width) {
  LayerNorm ln;
  ln.gamma = store.add(prefix + ".gamma", Tensor(Shape{width}, 1.0f));
  ln.beta = store.add(prefix + ".beta", Tensor(Shape{width}));
  return ln;
}

Tensor LayerNorm::operator()(const Tensor& tokens) const {
  return layer_norm(tokens, gamma, beta, eps);
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, std::size_t width,
                std::size_t hidden_width, Rng& rng) {
  Mlp m;
  m.hidden = Linear::create(store, prefix + ".fc1", width, hidden_width, rng);
  m.output = Linear::create(store, prefix + ".fc2", hidden_width, width, rng);
  return m;
}

Tensor Mlp::operator()(const Tensor& tokens) const { return output(relu(hidden(tokens))); }

Conv3x3 Conv3x3::create(ParamStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, Rng& rng) {
  Conv3x3 c;
  c.weight = store.add(prefix + ".weight", Tensor(Shape{out, in, 3, 3}));
  init_uniform(c.weight, in * 9, rng);
  c.bias = store.add(prefix + ".bias", Tensor(Shape{out}));
  return c;
}

Tensor Conv3x3::operator()(const Tensor& x) const { return conv2d(x, weight, bias); }

}  // namespace wfanet
