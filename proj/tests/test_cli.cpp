// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "wfanet/cli.hpp"
#include "wfanet/data.hpp"
#include "wfanet/raster.hpp"
#include "wfanet/wavelet.hpp"

using namespace wfanet;
using wfanet::testing::file_bytes;
using wfanet::testing::TempDir;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "wfanet");
  return cli::run(args);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

int synth(const std::filesystem::path& out, const std::string& seed, const std::string& count = "2",
          const std::string& size = "32") {
  return run({"synth", "--seed", seed, "--count", count, "--bands", "2", "--size", size, "--ratio", "4", "--out",
              out.string()});
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}) == cli::kExitUsage);
  CHECK(run({"paint"}) == cli::kExitUsage);
  CHECK(run({"synth", "--out", "x", "--colour", "red"}) == cli::kExitUsage);
  CHECK(run({"synth"}) == cli::kExitUsage);
  CHECK(run({"eval", "--mode", "sideways", "--test", "t.wfrs"}) == cli::kExitUsage);
  CHECK(run({"dwt", "--in", "a.wfrs", "--out", "d", "--levels", "0"}) == cli::kExitUsage);
}

TEST_CASE("synth is byte-reproducible") {
  TempDir a("cli"), b("cli");
  REQUIRE(synth(a.path(), "7") == cli::kExitOk);
  REQUIRE(synth(b.path(), "7") == cli::kExitOk);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a / "train")) {
    CHECK(file_bytes(entry.path()) == file_bytes(b.path() / "train" / entry.path().filename()));
    ++files;
  }
  CHECK(files == 6);
}

TEST_CASE("dwt writes invertible bands") {
  TempDir dir("cli");
  Rng rng(81);
  const Raster input = wfanet::testing::random_raster(rng, 2, 16, 8);
  save_raster(input, dir / "in.wfrs");
  REQUIRE(run({"dwt", "--in", (dir / "in.wfrs").string(), "--levels", "2", "--out", (dir / "bands").string()}) ==
          cli::kExitOk);
  auto band = [&](int level, const char* name) {
    return load_raster(dir.path() / "bands" / ("level" + std::to_string(level) + "_" + name + ".wfrs"),
                       RangeCheck::kNone)
        .to_tensor();
  };
  const Tensor ll0 = idwt2({band(1, "ll"), band(1, "lh"), band(1, "hl"), band(1, "hh")});
  CHECK(wfanet::testing::max_abs_diff(ll0.data(), band(0, "ll").data()) <= 1e-5f);
  const Tensor back = idwt2({band(0, "ll"), band(0, "lh"), band(0, "hl"), band(0, "hh")});
  CHECK(wfanet::testing::max_abs_diff(back.data(), input.to_tensor().data()) <= 1e-5f);

  CHECK(run({"dwt", "--in", (dir / "in.wfrs").string(), "--levels", "4", "--out", (dir / "deep").string()}) ==
        cli::kExitData);
  CHECK(run({"dwt", "--in", (dir / "none.wfrs").string(), "--out", (dir / "x").string()}) == cli::kExitData);
}

TEST_CASE("train, fuse and eval") {
  TempDir dir("cli");
  REQUIRE(synth(dir.path(), "3") == cli::kExitOk);
  write_json(dir / "config.json", {{"channels", 4}, {"epochs", 5}, {"batch_size", 2}});
  const std::string data = dir.path().string(), params = (dir / "net.wfpm").string();
  REQUIRE(run({"train", "--data", data, "--config", (dir / "config.json").string(), "--epochs", "2", "--seed", "9",
               "--out", params, "--report", (dir / "report.json").string()}) == cli::kExitOk);

  const auto report = read_json(dir / "report.json");
  CHECK(report["loss_history"].size() == 2);
  CHECK(report["training"]["batch_size"] == 2);
  CHECK(report["network"]["channels"] == 4);
  CHECK(report["network"]["ms_bands"] == 2);
  CHECK(report["network"]["seed"] == 9);

  REQUIRE(run({"train", "--data", data, "--config", (dir / "config.json").string(), "--epochs", "2", "--seed", "9",
               "--out", (dir / "again.wfpm").string()}) == cli::kExitOk);
  CHECK(file_bytes(params) == file_bytes(dir / "again.wfpm"));

  const std::string pan = (dir / "train" / "0_pan.wfrs").string(), ms = (dir / "train" / "0_lrms.wfrs").string();
  const std::string gt = (dir / "train" / "0_gt.wfrs").string(), fused = (dir / "fused.wfrs").string();
  REQUIRE(run({"fuse", "--pan", pan, "--ms", ms, "--params", params, "--out", fused, "--diff", gt,
               (dir / "diff.wfrs").string()}) == cli::kExitOk);
  const Raster f = load_raster(fused), g = load_raster(gt), d = load_raster(dir / "diff.wfrs");
  CHECK(f.same_shape(g));
  for (std::size_t i = 0; i < d.values.size(); ++i) CHECK(d.values[i] == std::abs(f.values[i] - g.values[i]));
  CHECK(run({"fuse", "--pan", pan, "--ms", gt, "--params", params, "--out", fused}) == cli::kExitData);

  REQUIRE(run({"eval", "--mode", "reduced", "--ref", gt, "--test", fused, "--json", (dir / "r.json").string()}) ==
          cli::kExitOk);
  const auto reduced = read_json(dir / "r.json");
  CHECK(reduced.is_object());
  CHECK(reduced["psnr"].is_number());
  CHECK(reduced["hqnr"].is_null());
  for (const auto& [key, value] : reduced.items()) CHECK_FALSE(value.is_structured());

  REQUIRE(run({"eval", "--mode", "full", "--ms", ms, "--pan", pan, "--test", fused, "--json",
               (dir / "f.json").string()}) == cli::kExitOk);
  const auto full = read_json(dir / "f.json");
  CHECK(full["hqnr"].get<double>() ==
        doctest::Approx((1 - full["d_lambda"].get<double>()) * (1 - full["d_s"].get<double>())));

  CHECK(run({"eval", "--mode", "full", "--test", fused}) == cli::kExitUsage);
  CHECK(run({"eval", "--ref", (dir / "nope.wfrs").string(), "--test", fused}) == cli::kExitData);
}

TEST_CASE("config and data failures map to their exit codes") {
  TempDir dir("cli");
  REQUIRE(synth(dir.path(), "4", "1", "16") == cli::kExitOk);
  const std::string data = dir.path().string(), out = (dir / "p.wfpm").string();

  write_json(dir / "typo.json", {{"chanels", 4}});
  CHECK(run({"train", "--data", data, "--config", (dir / "typo.json").string(), "--out", out}) == cli::kExitUsage);
  std::ofstream(dir / "broken.json") << "{ channels";
  CHECK(run({"train", "--data", data, "--config", (dir / "broken.json").string(), "--out", out}) == cli::kExitData);
  CHECK(run({"train", "--data", (dir / "missing").string(), "--out", out}) == cli::kExitData);

  // A runaway learning rate drives the loss to infinity.
  write_json(dir / "tiny.json", {{"channels", 2}, {"batch_size", 1}});
  CHECK(run({"train", "--data", data, "--config", (dir / "tiny.json").string(), "--epochs", "3", "--lr", "1e30",
             "--out", out}) == cli::kExitNumeric);
}
