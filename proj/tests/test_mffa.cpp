// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "wfanet/error.hpp"
#include "wfanet/gradcheck.hpp"
#include "wfanet/mffa.hpp"
#include "wfanet/params.hpp"

using namespace wfanet;
using wfanet::testing::max_abs_diff;
using wfanet::testing::random_tensor;

namespace {

// Double-precision reference for softmax(q k^T / sqrt(c)) v.
std::vector<double> reference_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  const std::size_t nq = q.dim(0), nk = k.dim(0), c = q.dim(1), cv = v.dim(1);
  std::vector<double> out(nq * cv, 0.0);
  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<double> s(nk);
    double top = -1e300;
    for (std::size_t j = 0; j < nk; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) s[j] += double(q.at(i * c + ch)) * k.at(j * c + ch);
      s[j] /= std::sqrt(double(c));
      top = std::max(top, s[j]);
    }
    double total = 0.0;
    for (double& x : s) total += (x = std::exp(x - top));
    for (std::size_t j = 0; j < nk; ++j)
      for (std::size_t ch = 0; ch < cv; ++ch) out[i * cv + ch] += s[j] / total * v.at(j * cv + ch);
  }
  return out;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& order) {
  const std::size_t c = t.dim(1);
  Tensor out(t.shape());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t ch = 0; ch < c; ++ch) out.mutable_data()[i * c + ch] = t.at(order[i] * c + ch);
  return out;
}

struct Block {
  ParamStore store;
  MffaParams params;
};

Block make_block(MffaOptions options, std::uint64_t seed = 1) {
  Block b;
  Rng rng(seed);
  b.params = MffaParams::create(b.store, "mffa", options, rng);
  return b;
}

}  // namespace

TEST_CASE("attention on two scalar tokens") {
  const Tensor q({2, 1}, {1, 2}), k({2, 1}, {0.5f, -1}), v({2, 1}, {3, 5});
  Tensor map;
  const Tensor out = scaled_attention(q, k, v, &map);
  CHECK(out.at(0) == doctest::Approx(3.36485105).epsilon(1e-6));
  CHECK(out.at(1) == doctest::Approx(3.09485175).epsilon(1e-6));
  CHECK(map.at(0) == doctest::Approx(0.81757448).epsilon(1e-6));
  CHECK(map.at(3) == doctest::Approx(0.04742587).epsilon(1e-5));
}

TEST_CASE("attention agrees with a double-precision reference") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t nq = 1 + rng.below(20), nk = 1 + rng.below(70), c = 1 + rng.below(9), cv = 1 + rng.below(5);
    const double spread = rng.uniform(0.1, 6.0);
    const Tensor q = random_tensor(rng, {nq, c}, -spread, spread), k = random_tensor(rng, {nk, c}, -spread, spread);
    const Tensor v = random_tensor(rng, {nk, cv});
    const Tensor out = scaled_attention(q, k, v);
    const auto ref = reference_attention(q, k, v);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(out.at(i) == doctest::Approx(ref[i]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("identical keys average the values") {
  Rng rng(32);
  const Tensor q = random_tensor(rng, {5, 3});
  Tensor k({6, 3});
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t ch = 0; ch < 3; ++ch) k.mutable_data()[j * 3 + ch] = 0.3f * (ch + 1.0f);
  const Tensor v = random_tensor(rng, {6, 2});
  const Tensor out = scaled_attention(q, k, v);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 6; ++j) mean += v.at(j * 2 + ch) / 6.0;
    for (std::size_t i = 0; i < 5; ++i) CHECK(out.at(i * 2 + ch) == doctest::Approx(mean).epsilon(1e-6));
  }
}

TEST_CASE("consistent token permutation permutes the output") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(7), c = 1 + rng.below(4);
    const Tensor q = random_tensor(rng, {n, c}), k = random_tensor(rng, {n, c}), v = random_tensor(rng, {n, c});
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    const Tensor base = scaled_attention(q, k, v);
    const Tensor moved = scaled_attention(permute_rows(q, order), permute_rows(k, order), permute_rows(v, order));
    CHECK(max_abs_diff(moved.data(), permute_rows(base, order).data()) <= 1e-6f);
  }
}

TEST_CASE("attention shape errors") {
  CHECK_THROWS_AS(scaled_attention(Tensor({2, 3}), Tensor({2, 4}), Tensor({2, 3})), DimensionError);
  CHECK_THROWS_AS(scaled_attention(Tensor({2, 3}), Tensor({2, 3}), Tensor({3, 3})), DimensionError);
}

TEST_CASE("triplet generation") {
  MffaOptions opt;
  opt.channels = 4;
  const Block b = make_block(opt);
  Rng rng(34);

  SUBCASE("shapes") {
    const FrequencyTriplet t = generate_triplet(random_tensor(rng, {4, 8, 12}), random_tensor(rng, {4, 4, 6}), b.params);
    REQUIRE(t.queries.size() == 4);
    for (const Tensor& x : t.queries) CHECK(x.shape() == Shape{24, 4});
    CHECK(t.key.shape() == Shape{24, 4});
    CHECK(t.value.shape() == Shape{24, 4});
  }
  SUBCASE("constant inputs give constant detail queries") {
    const FrequencyTriplet t = generate_triplet(Tensor({4, 8, 8}, 0.7f), Tensor({4, 4, 4}, -0.2f), b.params);
    for (std::size_t band = 1; band < 4; ++band) {
      const Tensor& x = t.queries[band];
      for (std::size_t i = 1; i < 16; ++i)
        for (std::size_t ch = 0; ch < 4; ++ch) CHECK(x.at(i * 4 + ch) == x.at(ch));
    }
    CHECK(max_abs_diff(t.queries[1].data(), t.queries[2].data()) == 0.0f);
  }
  SUBCASE("extents must differ by exactly two") {
    CHECK_THROWS_AS(generate_triplet(Tensor({4, 64, 64}), Tensor({4, 16, 16}), b.params), DimensionError);
    CHECK_THROWS_AS(generate_triplet(Tensor({3, 8, 8}), Tensor({3, 4, 4}), b.params), DimensionError);
  }
}

TEST_CASE("mffa forward") {
  MffaOptions opt;
  opt.channels = 4;
  const Block b = make_block(opt);
  Rng rng(35);
  const Tensor pan = random_tensor(rng, {4, 8, 8}), ms = random_tensor(rng, {4, 4, 4});

  MffaTrace trace;
  const Tensor out = mffa_forward(pan, ms, b.params, &trace);
  CHECK(out.shape() == Shape{4, 8, 8});
  REQUIRE(trace.attention_maps.size() == 4);
  for (const Tensor& map : trace.attention_maps) {
    REQUIRE(map.shape() == Shape{16, 16});
    for (std::size_t i = 0; i < 16; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 16; ++j) {
        CHECK(map.at(i * 16 + j) >= 0.0f);
        total += map.at(i * 16 + j);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  const Tensor again = mffa_forward(pan, ms, b.params);
  CHECK(std::equal(out.data().begin(), out.data().end(), again.data().begin()));
}

TEST_CASE("mffa at the default width") {
  MffaOptions opt;
  const Block b = make_block(opt);
  Rng rng(36);
  const Tensor out = mffa_forward(random_tensor(rng, {32, 64, 64}), random_tensor(rng, {32, 32, 32}), b.params);
  CHECK(out.shape() == Shape{32, 64, 64});
}

TEST_CASE("role assignment is visible in parameter names") {
  MffaOptions opt;
  opt.channels = 4;
  const Block ours = make_block(opt);
  for (const char* band : kBandNames) {
    CHECK(ours.store.contains(std::string("mffa.q.") + band + ".mlp.fc1.weight"));
    CHECK(ours.store.contains(std::string("mffa.out.") + band + ".mlp.fc2.bias"));
  }
  CHECK(ours.store.contains("mffa.k.mlp.fc1.weight"));
  CHECK(ours.store.at("mffa.v.fuse_conv.weight").shape() == Shape{4, 8, 3, 3});
  CHECK(ours.store.names_with_prefix("mffa.fallback").empty());

  opt.query_ablation = true;
  const Block spatial_q = make_block(opt);
  CHECK(spatial_q.store.names_with_prefix("mffa.q.ll").empty());
  CHECK(spatial_q.store.contains("mffa.q.spatial.conv.weight"));

  opt.query_ablation = false;
  opt.use_attention = false;
  const Block fallback = make_block(opt);
  CHECK(fallback.store.names_with_prefix("mffa.q").empty());
  CHECK(fallback.store.names_with_prefix("mffa.k").empty());
  CHECK_FALSE(fallback.store.names_with_prefix("mffa.fallback").empty());
}

TEST_CASE("permutations and ablations run with equal shapes") {
  Rng rng(37);
  const Tensor pan = random_tensor(rng, {4, 8, 8}), ms = random_tensor(rng, {4, 4, 4});
  for (const char* name : {"ours", "v1", "v2", "v3", "v4", "v5"}) {
    MffaOptions opt;
    opt.channels = 4;
    opt.permutation = parse_permutation(name);
    CHECK(to_string(opt.permutation) == name);
    CHECK(mffa_forward(pan, ms, make_block(opt).params).shape() == Shape{4, 8, 8});
  }
  for (int which = 0; which < 4; ++which) {
    MffaOptions opt;
    opt.channels = 4;
    opt.query_ablation = which == 0;
    opt.key_ablation = which == 1;
    opt.value_ablation = which == 2;
    opt.use_attention = which != 3;
    CHECK(mffa_forward(pan, ms, make_block(opt).params).shape() == Shape{4, 8, 8});
  }
  CHECK_THROWS_AS(parse_permutation("v6"), ConfigError);
  MffaOptions bad;
  bad.permutation = TripletPermutation::kV2;
  bad.key_ablation = true;
  CHECK_THROWS_AS(make_block(bad), ConfigError);
}

TEST_CASE("permutation roles are distinct assignments") {
  std::set<std::array<int, 3>> seen;
  for (auto p : {TripletPermutation::kOurs, TripletPermutation::kV1, TripletPermutation::kV2, TripletPermutation::kV3,
                 TripletPermutation::kV4, TripletPermutation::kV5}) {
    auto roles = permutation_roles(p);
    auto sorted = roles;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::array<int, 3>{0, 1, 2});
    seen.insert(roles);
  }
  CHECK(seen.size() == 6);
  CHECK(permutation_roles(TripletPermutation::kOurs) == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("mffa gradients at toy size") {
  MffaOptions opt;
  opt.channels = 2;
  const Block b = make_block(opt, 5);
  Rng rng(38);
  const Tensor pan = random_tensor(rng, {2, 8, 8}, -1, 1, true), ms = random_tensor(rng, {2, 4, 4}, -1, 1, true);
  const Tensor w = random_tensor(rng, {2, 8, 8});
  CHECK(grad_check([=] { return sum(mul(mffa_forward(pan, ms, b.params), w)); }, {pan, ms}) <= 1e-3);
  const Tensor q = random_tensor(rng, {5, 3}, -1, 1, true), k = random_tensor(rng, {7, 3}, -1, 1, true);
  const Tensor v = random_tensor(rng, {7, 2}, -1, 1, true), wv = random_tensor(rng, {5, 2});
  CHECK(grad_check([=] { return sum(mul(scaled_attention(q, k, v), wv)); }, {q, k, v}) <= 1e-3);
}
