// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "wfanet/data.hpp"
#include "wfanet/metrics.hpp"
#include "wfanet/network.hpp"
#include "wfanet/optim.hpp"

namespace wfanet {

struct TrainConfig {
  std::size_t epochs = 360;
  std::size_t batch_size = 32;
  double lr = 9e-4;
  std::size_t lr_halving_period = 90;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip, off unless set.
  std::optional<double> grad_clip;

  void validate() const;
  /// 64 samples of 64x64, 50 epochs, batch 8.
  static TrainConfig desk_scale();

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
  static const std::vector<std::string>& json_keys();
};

/// lr * 0.5^floor(epoch / lr_halving_period)
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

struct TrainReport {
  std::vector<double> loss_history;  // one mean loss per epoch
  std::uint64_t params_checksum = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;

  nlohmann::json to_json() const;
};

/// Owns the optimizer state for one network during training.
class Trainer {
 public:
  Trainer(Wfanet network, TrainConfig config);

  /// One Adam step on the mean l1 loss of `batch`. Each sample runs on its
  /// own tape; gradients accumulate in batch order. Returns the batch loss.
  double step(std::span<const SamplePair* const> batch, double lr);

  const Wfanet& network() const { return network_; }
  const AdamState& optimizer_state() const { return state_; }

 private:
  Wfanet network_;
  TrainConfig config_;
  std::vector<Tensor> params_;
  AdamState state_;
};

struct TrainResult {
  Wfanet network;
  TrainReport report;
};

/// Throws DimensionError when a sample does not fit the network.
void check_dataset(const NetworkConfig& config, std::span<const SamplePair> dataset, bool require_gt);

TrainResult train(const NetworkConfig& net_config, const TrainConfig& train_config,
                  std::span<const SamplePair> dataset);

/// Inference without gradient recording; output clamped to [0, 1].
Raster fuse(const Wfanet& network, const Raster& pan, const Raster& lrms);

enum class EvalMode { kReduced, kFull };

using Predictor = std::function<Raster(const SamplePair&)>;

/// Reduced mode compares predictions with gt; full mode reports D_lambda,
/// D_s and HQNR against the sample's own LRMS and PAN.
std::vector<MetricsReport> evaluate(const Predictor& predict, std::span<const SamplePair> dataset,
                                    EvalMode mode, std::size_t ratio, double blur_sigma);
std::vector<MetricsReport> evaluate(const Wfanet& network, std::span<const SamplePair> dataset,
                                    EvalMode mode);

/// Mean l1 between network output and gt over a dataset.
double mean_l1(const Wfanet& network, std::span<const SamplePair> dataset);

}  // namespace wfanet
