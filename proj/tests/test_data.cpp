// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include <algorithm>
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "support.hpp"
#include "wfanet/data.hpp"
#include "wfanet/error.hpp"
#include "wfanet/raster.hpp"

using namespace wfanet;
using wfanet::testing::file_bytes;
using wfanet::testing::random_raster;
using wfanet::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("raster file layout") {
  TempDir dir("raster");
  Raster r(1, 2, 2);
  r.values = {0.0f, 0.5f, 1.0f, 0.25f};
  save_raster(r, dir / "r.wfrs");
  const auto bytes = file_bytes(dir / "r.wfrs");
  REQUIRE(bytes.size() == 40);
  CHECK(kRasterHeaderBytes == 24);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "WFRSv001");
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 2);
  CHECK(bytes[16] == 2);
  CHECK(bytes[20] == 11);
  float second;
  std::memcpy(&second, bytes.data() + 28, 4);
  CHECK(second == 0.5f);
}

TEST_CASE("raster round trips and load errors") {
  TempDir dir("raster");
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const Raster r = random_raster(rng, 1 + rng.below(4), 1 + rng.below(9), 1 + rng.below(9));
    save_raster(r, dir / "r.wfrs");
    const Raster back = load_raster(dir / "r.wfrs");
    CHECK(back.same_shape(r));
    CHECK(back.bit_depth == r.bit_depth);
    CHECK(std::memcmp(back.values.data(), r.values.data(), r.values.size() * 4) == 0);
  }

  auto bytes = file_bytes(dir / "r.wfrs");
  write_bytes(dir / "short.wfrs", std::vector<char>(bytes.begin(), bytes.end() - 3));
  CHECK_THROWS_AS(load_raster(dir / "short.wfrs"), FormatError);
  write_bytes(dir / "header.wfrs", std::vector<char>(bytes.begin(), bytes.begin() + 10));
  CHECK_THROWS_AS(load_raster(dir / "header.wfrs"), FormatError);
  bytes[3] = 'X';
  write_bytes(dir / "magic.wfrs", bytes);
  CHECK_THROWS_AS(load_raster(dir / "magic.wfrs"), FormatError);
  CHECK_THROWS_AS(load_raster(dir / "missing.wfrs"), FormatError);

  Raster wild(1, 1, 3);
  wild.values = {-0.5f, 0.5f, 2.0f};
  save_raster(wild, dir / "wild.wfrs");
  CHECK_THROWS_AS(load_raster(dir / "wild.wfrs"), ValidationError);
  CHECK(load_raster(dir / "wild.wfrs", RangeCheck::kNone).values == wild.values);
}

TEST_CASE("synthetic scenes") {
  const Raster a = synth_scene(5, 4, 32, 48), b = synth_scene(5, 4, 32, 48), c = synth_scene(6, 4, 32, 48);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK(a.bands == 4);
  CHECK(a.height == 32);
  CHECK(a.width == 48);
  const auto [lo, hi] = std::minmax_element(a.values.begin(), a.values.end());
  CHECK(*lo >= 0.0f);
  CHECK(*hi <= 1.0f);
  CHECK(*hi - *lo > 0.5f);
  CHECK_THROWS_AS(synth_scene(1, 4, 6, 6), ConfigError);
  CHECK_THROWS_AS(synth_scene(1, 4, 9, 16), ConfigError);
  CHECK_THROWS_AS(synth_scene(1, 0, 16, 16), ConfigError);
}

TEST_CASE("wald degradation") {
  SUBCASE("constant in, constant out") {
    const Raster out = wald_degrade(Raster(2, 16, 16, 0.375f), 4);
    CHECK(out.height == 4);
    CHECK(out.width == 4);
    for (float v : out.values) CHECK(v == doctest::Approx(0.375).epsilon(1e-6));
  }
  SUBCASE("eight-band 64x64 geometry") {
    const Raster out = wald_degrade(synth_scene(1, 8, 64, 64), 4);
    CHECK(out.bands == 8);
    CHECK(out.height == 16);
    CHECK(out.width == 16);
  }
  SUBCASE("impulse samples the separable kernel") {
    // sigma 1.7, radius 6; taps at offsets 0 and 4
    const double k0 = 0.23469665680137547, k4 = 0.014733558280827428;
    Raster impulse(1, 16, 16);
    impulse.at(0, 6, 6) = 1.0f;
    const Raster out = wald_degrade(impulse, 4);
    auto tap = [&](int d) { return d == 0 ? k0 : (std::abs(d) == 4 ? k4 : 0.0); };
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double expected = tap(2 + 4 * i - 6) * tap(2 + 4 * j - 6);
        CHECK(out.at(0, i, j) == doctest::Approx(expected).epsilon(1e-6).scale(1e-3));
      }
  }
  SUBCASE("shift commutes with degradation") {
    Rng rng(62);
    const Raster x = random_raster(rng, 3, 16, 24);
    Raster shifted = x;
    for (float& v : shifted.values) v += 0.25f;
    const Raster a = wald_degrade(x, 4), b = wald_degrade(shifted, 4);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] - a.values[i] == doctest::Approx(0.25).epsilon(1e-5));
  }
  CHECK_THROWS_AS(wald_degrade(Raster(1, 18, 16), 4), DimensionError);
  CHECK_THROWS_AS(gaussian_kernel(0.0), ConfigError);
}

TEST_CASE("panchromatic synthesis") {
  Raster two(2, 3, 3);
  for (std::size_t i = 0; i < 9; ++i) {
    two.values[i] = 0.2f;
    two.values[9 + i] = 0.4f;
  }
  for (float v : make_pan(two, {0.5, 0.5}).values) CHECK(v == doctest::Approx(0.3));
  CHECK(make_pan(two, {1.0, 0.0}).values == std::vector<float>(9, 0.2f));
  CHECK_THROWS_AS(make_pan(two, {0.45, 0.45}), ConfigError);
  CHECK_THROWS_AS(make_pan(two, {1.5, -0.5}), ConfigError);
  CHECK_THROWS_AS(make_pan(two, {1.0}), ConfigError);
}

TEST_CASE("sample pairs satisfy the ratio invariant") {
  Rng rng(63);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t ratio = std::size_t{2} << rng.below(2), size = ratio * (4 + rng.below(5)) * 2;
    const SamplePair s = make_sample_pair(rng.next_u64(), 1 + rng.below(8), size, ratio);
    CHECK_NOTHROW(s.validate(ratio));
    CHECK(s.ratio() == ratio);
    CHECK(s.gt->bands == s.lrms.bands);
  }
  SamplePair broken = make_sample_pair(1, 3, 32, 4);
  CHECK_THROWS_AS(broken.validate(2), DimensionError);
  broken.lrms = Raster(2, 8, 8);
  CHECK_THROWS_AS(broken.validate(4), DimensionError);
}

TEST_CASE("datasets are deterministic and round trip") {
  TempDir a("ds"), b("ds");
  std::vector<SamplePair> samples;
  for (std::uint64_t i = 0; i < 3; ++i) samples.push_back(make_sample_pair(100 + i, 4, 32, 4));
  write_dataset(a.path(), "train", samples);
  std::vector<SamplePair> again;
  for (std::uint64_t i = 0; i < 3; ++i) again.push_back(make_sample_pair(100 + i, 4, 32, 4));
  write_dataset(b.path(), "train", again);
  for (const auto& entry : std::filesystem::directory_iterator(a / "train")) {
    CHECK(file_bytes(entry.path()) == file_bytes(b.path() / "train" / entry.path().filename()));
  }
  const auto back = read_dataset(a.path(), "train");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].pan.values == samples[i].pan.values);
    CHECK(back[i].lrms.values == samples[i].lrms.values);
    CHECK(back[i].gt->values == samples[i].gt->values);
  }
  CHECK_THROWS_AS(read_dataset(a.path(), "test"), FormatError);
}
