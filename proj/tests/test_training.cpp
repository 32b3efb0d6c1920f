// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include <cmath>
#include <limits>

#include "doctest.h"
#include "support.hpp"
#include "wfanet/error.hpp"
#include "wfanet/training.hpp"

using namespace wfanet;

namespace {

NetworkConfig tiny_net() {
  NetworkConfig c;
  c.channels = 4;
  c.ms_bands = 2;
  c.seed = 1;
  return c;
}

TrainConfig tiny_training() {
  TrainConfig t;
  t.epochs = 3;
  t.batch_size = 2;
  t.seed = 5;
  return t;
}

std::vector<SamplePair> tiny_dataset(std::size_t count = 4, std::size_t size = 16) {
  std::vector<SamplePair> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_sample_pair(40 + i, 2, size, 4));
  return out;
}

}  // namespace

TEST_CASE("learning rate halves on schedule") {
  const TrainConfig t;
  CHECK(learning_rate_at(t, 0) == 9e-4);
  CHECK(learning_rate_at(t, 89) == 9e-4);
  CHECK(learning_rate_at(t, 90) == 4.5e-4);
  for (std::size_t e : {179u, 180u, 359u, 1000u}) CHECK(learning_rate_at(t, e) == 9e-4 * std::pow(0.5, e / 90));
}

TEST_CASE("training config validation and json") {
  TrainConfig t;
  t.lr = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.epochs = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK(TrainConfig::desk_scale().epochs == 50);
  CHECK(TrainConfig::desk_scale().batch_size == 8);
  const TrainConfig back = TrainConfig::from_json(tiny_training().to_json());
  CHECK(back.to_json() == tiny_training().to_json());
  CHECK(TrainConfig::from_json(nlohmann::json{{"lr", 1e-3}}).lr == 1e-3);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"epochs", -2}}), ConfigError);
}

TEST_CASE("training is deterministic") {
  const auto data = tiny_dataset();
  const TrainResult a = train(tiny_net(), tiny_training(), data);
  const TrainResult b = train(tiny_net(), tiny_training(), data);
  CHECK(a.report.loss_history.size() == 3);
  CHECK(a.report.steps == 6);
  for (double l : a.report.loss_history) CHECK(std::isfinite(l));
  CHECK(a.report.loss_history == b.report.loss_history);
  CHECK(a.report.params_checksum == b.report.params_checksum);
  CHECK(a.report.params_checksum == a.network.params().checksum());

  TrainConfig other = tiny_training();
  other.seed = 6;
  CHECK(train(tiny_net(), other, data).report.loss_history != a.report.loss_history);
}

TEST_CASE("loss falls when fitting one sample") {
  NetworkConfig net = tiny_net();
  net.ms_bands = 4;
  const SamplePair sample = make_sample_pair(7, 4, 32, 4);
  Trainer trainer(Wfanet::create(net), TrainConfig{});
  const SamplePair* batch[] = {&sample};
  const double first = trainer.step(batch, 9e-4);
  double last = first;
  for (int s = 0; s < 150; ++s) last = trainer.step(batch, 9e-4);
  CHECK(trainer.optimizer_state().step == 151);
  CHECK(last < 0.6 * first);
}

TEST_CASE("training input validation") {
  auto data = tiny_dataset(2);
  NetworkConfig wrong = tiny_net();
  wrong.ms_bands = 3;
  CHECK_THROWS_AS(train(wrong, tiny_training(), data), DimensionError);
  CHECK_THROWS_AS(train(tiny_net(), tiny_training(), std::span<const SamplePair>{}), ConfigError);
  data[1].gt.reset();
  CHECK_THROWS_AS(train(tiny_net(), tiny_training(), data), ConfigError);

  auto poisoned = tiny_dataset(1);
  poisoned[0].pan.values[3] = std::numeric_limits<float>::quiet_NaN();
  Trainer trainer(Wfanet::create(tiny_net()), tiny_training());
  const SamplePair* batch[] = {&poisoned[0]};
  CHECK_THROWS_AS(trainer.step(batch, 1e-3), NumericError);
}

TEST_CASE("evaluation modes") {
  const auto data = tiny_dataset(2, 32);
  const auto perfect = evaluate([](const SamplePair& s) { return *s.gt; }, data, EvalMode::kReduced, 4, 1.7);
  REQUIRE(perfect.size() == 2);
  for (const auto& r : perfect) {
    CHECK(*r.sam == 0.0);
    CHECK(*r.ergas == 0.0);
    CHECK(*r.psnr == kPsnrCap);
  }

  std::vector<SamplePair> no_gt = data;
  for (auto& s : no_gt) s.gt.reset();
  const Wfanet net = Wfanet::create(tiny_net());
  const auto full = evaluate(net, no_gt, EvalMode::kFull);
  for (const auto& r : full) {
    CHECK(r.hqnr);
    CHECK(r.d_lambda);
    CHECK(r.d_s);
    CHECK_FALSE(r.psnr);
    CHECK_FALSE(r.sam);
  }
  CHECK_THROWS_AS(evaluate(net, no_gt, EvalMode::kReduced), ConfigError);

  const Raster fused = fuse(net, data[0].pan, data[0].lrms);
  CHECK(fused.bands == 2);
  CHECK(fused.height == 32);
  for (float v : fused.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(mean_l1(net, data) > 0.0);
}
