// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "wfanet/error.hpp"
#include "wfanet/gradcheck.hpp"
#include "wfanet/network.hpp"
#include "wfanet/sdem.hpp"

using namespace wfanet;
using wfanet::testing::max_abs_diff;
using wfanet::testing::random_tensor;

namespace {

float sigmoid_of(double x) { return static_cast<float>(1.0 / (1.0 + std::exp(-x))); }

NetworkConfig toy_config(std::size_t bands = 2, std::size_t channels = 4) {
  NetworkConfig c;
  c.channels = channels;
  c.ms_bands = bands;
  c.seed = 3;
  return c;
}

bool any_with(const ParamStore& store, const std::string& needle) {
  for (const auto& name : store.names())
    if (name.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("fab with zero weights is one half") {
  ParamStore store;
  Rng rng(41);
  SdemParams p = SdemParams::create(store, "sdem", 3, 1, DetailBlock::kFab, rng);
  for (const auto& name : store.names())
    for (float& v : store.at(name).mutable_data()) v = 0.0f;
  Rng data(42);
  const Tensor out = fab_forward(random_tensor(data, {3, 4, 4}), p.fabs[0]);
  for (float v : out.data()) CHECK(v == 0.5f);
}

TEST_CASE("fab matches a per-position hand evaluation") {
  ParamStore store;
  Rng rng(43);
  SdemParams p = SdemParams::create(store, "sdem", 2, 1, DetailBlock::kFab, rng);
  Linear& fab = p.fabs[0][0];
  // weight is [in x out]
  const float w[4] = {0.5f, -1.0f, 2.0f, 0.25f};
  std::copy(w, w + 4, fab.weight.mutable_data().begin());
  fab.bias.mutable_data()[0] = 0.1f;
  fab.bias.mutable_data()[1] = -0.3f;
  const Tensor band({2, 2, 2}, {1, 2, 3, 4, -1, 0, 1, 2});
  const Tensor out = fab_forward(band, p.fabs[0]);
  for (std::size_t pos = 0; pos < 4; ++pos) {
    const double x0 = band.at(pos), x1 = band.at(4 + pos);
    CHECK(out.at(pos) == doctest::Approx(sigmoid_of(x0 * 0.5 + x1 * 2.0 + 0.1)).epsilon(1e-6));
    CHECK(out.at(4 + pos) == doctest::Approx(sigmoid_of(-x0 + x1 * 0.25 - 0.3)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(fab_forward(Tensor({3, 2, 2}), p.fabs[0]), DimensionError);
}

TEST_CASE("sdem with zero weights reconstructs the constant-band pattern") {
  ParamStore store;
  Rng rng(44);
  SdemParams p = SdemParams::create(store, "sdem", 2, 3, DetailBlock::kFab, rng);
  for (const auto& name : store.names())
    for (float& v : store.at(name).mutable_data()) v = 0.0f;
  Rng data(45);
  const Tensor out = sdem_forward(random_tensor(data, {2, 4, 6}), p);
  // bands (0.5, 0.5, 0.5, 0.5) give the block [[2, 0], [0, 0]]
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const float expected = (y % 2 == 0 && x % 2 == 0) ? 2.0f : 0.0f;
        CHECK(out.at((c * 4 + y) * 6 + x) == doctest::Approx(expected));
      }
}

TEST_CASE("sdem properties") {
  Rng rng(46);
  for (DetailBlock kind : {DetailBlock::kFab, DetailBlock::kConv}) {
    ParamStore store;
    SdemParams p = SdemParams::create(store, "sdem", 3, 2, kind, rng);
    const Tensor pan = random_tensor(rng, {3, 8, 10});
    const Tensor out = sdem_forward(pan, p);
    CHECK(out.shape() == pan.shape());

    // Removing the detail bands of the input leaves the LL band of the output untouched.
    const WaveletBands b = dwt2(pan);
    const Tensor smooth = idwt2({b.ll, Tensor(b.lh.shape()), Tensor(b.hl.shape()), Tensor(b.hh.shape())});
    const Tensor diff = sub(out, sdem_forward(smooth, p));
    for (float v : dwt2(diff).ll.data()) CHECK(std::abs(v) <= 1e-6f);
  }
  ParamStore store;
  SdemParams p = SdemParams::create(store, "sdem", 3, 2, DetailBlock::kFab, rng);
  const auto bands = dwt2(random_tensor(rng, {3, 8, 8}, -5, 5)).as_array();
  for (std::size_t i = 0; i < 4; ++i)
    for (float v : fab_forward(bands[i], p.fabs[i]).data()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  CHECK(parse_detail_block("cb") == DetailBlock::kConv);
  CHECK_THROWS_AS(parse_detail_block("mlp"), ConfigError);
}

TEST_CASE("sdem gradients") {
  Rng rng(47);
  for (DetailBlock kind : {DetailBlock::kFab, DetailBlock::kConv}) {
    ParamStore store;
    SdemParams p = SdemParams::create(store, "sdem", 2, 2, kind, rng);
    const Tensor pan = random_tensor(rng, {2, 4, 4}, -1, 1, true), w = random_tensor(rng, {2, 4, 4});
    CHECK(grad_check([=] { return sum(mul(sdem_forward(pan, p), w)); }, {pan}) <= 1e-3);
  }
}

TEST_CASE("default network parameter count") {
  const Wfanet net = Wfanet::create(NetworkConfig{});
  CHECK(net.params().total_elements() == 151848);
  CHECK(init_params(NetworkConfig{}).total_elements() == 151848);
}

TEST_CASE("eight-band 64x64 geometry") {
  NetworkConfig c;
  c.channels = 8;
  const Wfanet net = Wfanet::create(c);
  Rng rng(48);
  const Tensor out = net.forward(random_tensor(rng, {1, 64, 64}, 0, 1), random_tensor(rng, {8, 16, 16}, 0, 1));
  CHECK(out.shape() == Shape{8, 64, 64});
}

TEST_CASE("shape contract over generated configurations") {
  Rng rng(49);
  for (int trial = 0; trial < 12; ++trial) {
    NetworkConfig c = toy_config(1 + rng.below(5), 2 + rng.below(3));
    c.scales = 1 + rng.below(3);
    c.ratio = std::size_t{1} << c.scales;
    c.multi_scale = rng.below(4) != 0;
    c.use_sdem = rng.below(2) != 0;
    const std::size_t h = 1 + rng.below(3), w = 1 + rng.below(3);
    const Wfanet net = Wfanet::create(c);
    const Tensor out = net.forward(random_tensor(rng, {1, h * c.ratio, w * c.ratio}, 0, 1),
                                   random_tensor(rng, {c.ms_bands, h, w}, 0, 1));
    CHECK(out.shape() == Shape{c.ms_bands, h * c.ratio, w * c.ratio});
  }
}

TEST_CASE("forward validation") {
  const Wfanet net = Wfanet::create(toy_config());
  CHECK_THROWS_AS(net.forward(Tensor({1, 16, 16}), Tensor({2, 8, 8})), DimensionError);
  CHECK_THROWS_AS(net.forward(Tensor({1, 16, 16}), Tensor({3, 4, 4})), DimensionError);
  CHECK_THROWS_AS(net.forward(Tensor({2, 16, 16}), Tensor({2, 4, 4})), DimensionError);
  NetworkConfig bad = toy_config();
  bad.channels = 0;
  CHECK_THROWS_AS(Wfanet::create(bad), ConfigError);
  bad = toy_config();
  bad.ratio = 8;
  CHECK_THROWS_AS(Wfanet::create(bad), ConfigError);
}

TEST_CASE("initialization and forward are deterministic") {
  const Wfanet a = Wfanet::create(toy_config()), b = Wfanet::create(toy_config());
  CHECK(a.params().checksum() == b.params().checksum());
  NetworkConfig other = toy_config();
  other.seed = 4;
  CHECK(Wfanet::create(other).params().checksum() != a.params().checksum());

  Rng rng(50);
  const Tensor pan = random_tensor(rng, {1, 16, 16}, 0, 1), lrms = random_tensor(rng, {2, 4, 4}, 0, 1);
  const Tensor x = a.forward(pan, lrms), y = a.forward(pan, lrms);
  CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
}

TEST_CASE("initializer ranges") {
  const Wfanet net = Wfanet::create(toy_config());
  const ParamStore& p = net.params();
  const Tensor& w = p.at("head.weight");
  const double bound = std::sqrt(6.0 / (4 * 9));
  for (float v : w.data()) CHECK(std::abs(v) <= bound);
  for (float v : p.at("head.bias").data()) CHECK(v == 0.0f);
  for (float v : p.at("scale0.mffa.k.norm.gamma").data()) CHECK(v == 1.0f);
}

TEST_CASE("disabling a component removes its parameters") {
  const Wfanet full = Wfanet::create(toy_config());
  CHECK(any_with(full.params(), ".sdem."));
  CHECK(any_with(full.params(), "scale1."));

  NetworkConfig c = toy_config();
  c.use_sdem = false;
  const Wfanet no_sdem = Wfanet::create(c);
  CHECK_FALSE(any_with(no_sdem.params(), ".sdem."));
  for (const auto& name : no_sdem.params().names()) CHECK(full.params().contains(name));

  c = toy_config();
  c.multi_scale = false;
  const Wfanet single = Wfanet::create(c);
  CHECK_FALSE(any_with(single.params(), "scale1."));

  c = toy_config();
  c.use_mffa_attention = false;
  const Wfanet fallback = Wfanet::create(c);
  CHECK_FALSE(any_with(fallback.params(), ".mffa.q."));
  CHECK_FALSE(any_with(fallback.params(), ".mffa.k."));

  c = toy_config();
  c.detail_block = DetailBlock::kConv;
  const Wfanet cb = Wfanet::create(c);
  CHECK_FALSE(any_with(cb.params(), ".fab"));
  CHECK(any_with(cb.params(), ".cb0."));
}

TEST_CASE("config json round trip and overrides") {
  NetworkConfig c = toy_config();
  c.triplet_permutation = TripletPermutation::kV3;
  c.detail_block = DetailBlock::kConv;
  const NetworkConfig back = NetworkConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  const NetworkConfig partial = NetworkConfig::from_json(nlohmann::json{{"channels", 16}}, c);
  CHECK(partial.channels == 16);
  CHECK(partial.triplet_permutation == TripletPermutation::kV3);
  CHECK_THROWS_AS(NetworkConfig::from_json(nlohmann::json{{"channels", "wide"}}), ConfigError);
  CHECK_THROWS_AS(NetworkConfig::from_json(nlohmann::json{{"channels", -8}}), ConfigError);
  CHECK_THROWS_AS(NetworkConfig::from_json(nlohmann::json{{"fab_count", 2.5}}), ConfigError);
}

TEST_CASE("parameter files round trip bit-exactly") {
  wfanet::testing::TempDir dir("net");
  const Wfanet net = Wfanet::create(toy_config());
  net.save(dir / "a.wfpm");
  const Wfanet back = Wfanet::load(dir / "a.wfpm");
  CHECK(back.params().checksum() == net.params().checksum());
  CHECK(back.config().to_json() == net.config().to_json());
  back.save(dir / "b.wfpm");
  CHECK(wfanet::testing::file_bytes(dir / "a.wfpm") == wfanet::testing::file_bytes(dir / "b.wfpm"));

  auto bytes = wfanet::testing::file_bytes(dir / "a.wfpm");
  {
    std::ofstream out(dir / "short.wfpm", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  }
  CHECK_THROWS_AS(load_params(dir / "short.wfpm"), FormatError);
  bytes[0] = 'X';
  {
    std::ofstream out(dir / "magic.wfpm", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_params(dir / "magic.wfpm"), FormatError);
}

TEST_CASE("checked forward is finite") {
  CheckedModeGuard checked(true);
  const Wfanet net = Wfanet::create(toy_config());
  Rng rng(51);
  const Tensor out = net.forward(random_tensor(rng, {1, 16, 16}, 0, 1), random_tensor(rng, {2, 4, 4}, 0, 1));
  for (float v : out.data()) CHECK(std::isfinite(v));
}
