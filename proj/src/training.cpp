// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "wfanet/error.hpp"
#include "wfanet/rng.hpp"

namespace wfanet {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (lr_halving_period == 0) throw ConfigError("lr_halving_period must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 8;
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"epochs", epochs},
                      {"batch_size", batch_size},
                      {"lr", lr},
                      {"lr_halving_period", lr_halving_period},
                      {"seed", seed}};
  j["grad_clip"] = grad_clip ? nlohmann::json(*grad_clip) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  auto count = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.template get<std::int64_t>() < 0)) {
      throw ConfigError(std::string(key) + " must be a non-negative integer");
    }
    field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  try {
    count("epochs", c.epochs);
    count("batch_size", c.batch_size);
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    count("lr_halving_period", c.lr_halving_period);
    count("seed", c.seed);
    if (j.contains("grad_clip")) {
      c.grad_clip = j.at("grad_clip").is_null() ? std::nullopt : std::optional<double>(j.at("grad_clip").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid training config value: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

const std::vector<std::string>& TrainConfig::json_keys() {
  static const std::vector<std::string> keys = {"epochs", "batch_size", "lr", "lr_halving_period", "seed",
                                                "grad_clip"};
  return keys;
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  return config.lr * std::ldexp(1.0, -static_cast<int>(epoch / config.lr_halving_period));
}

nlohmann::json TrainReport::to_json() const {
  return {{"loss_history", loss_history},
          {"params_checksum", params_checksum},
          {"wall_seconds", wall_seconds},
          {"seed", seed},
          {"steps", steps}};
}

Trainer::Trainer(Wfanet network, TrainConfig config)
    : network_(std::move(network)), config_(std::move(config)), params_(network_.params().tensors()) {
  state_ = AdamState::for_params(params_);
}

double Trainer::step(std::span<const SamplePair* const> batch, double lr) {
  if (batch.empty()) throw ContractError("Trainer::step: empty batch");
  network_.params().zero_grad();
  const float weight = 1.0f / static_cast<float>(batch.size());
  double total = 0.0;
  for (const SamplePair* sample : batch) {
    if (!sample->gt) throw ConfigError("training samples require ground truth");
    active_tape().clear();
    const Tensor pred = network_.forward(sample->pan.to_tensor(), sample->lrms.to_tensor());
    const Tensor loss = l1_loss(pred, sample->gt->to_tensor());
    const double value = loss.item();
    if (!std::isfinite(value)) {
      active_tape().clear();
      throw NumericError("non-finite loss at optimizer step " + std::to_string(state_.step + 1));
    }
    total += value;
    backward(scale(loss, weight));
  }
  if (config_.grad_clip) {
    double norm_sq = 0.0;
    for (const auto& p : params_)
      for (float g : p.grad()) norm_sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm_sq);
    if (norm > *config_.grad_clip) {
      const float factor = static_cast<float>(*config_.grad_clip / norm);
      for (auto& p : params_)
        if (p.has_grad())
          for (float& g : p.mutable_grad()) g *= factor;
    }
  }
  adam_step(params_, state_, static_cast<float>(lr));
  return total / static_cast<double>(batch.size());
}

void check_dataset(const NetworkConfig& config, std::span<const SamplePair> dataset, bool require_gt) {
  if (dataset.empty()) throw ConfigError("dataset is empty");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const SamplePair& s = dataset[i];
    const std::string where = "sample " + std::to_string(i) + ": ";
    if (require_gt && !s.gt) throw ConfigError(where + "missing ground truth");
    if (s.lrms.bands != config.ms_bands) {
      throw DimensionError(where + "has " + std::to_string(s.lrms.bands) + " bands, network expects " +
                           std::to_string(config.ms_bands));
    }
    try {
      s.validate(config.ratio);
    } catch (const DimensionError& e) {
      throw DimensionError(where + e.what());
    }
  }
}

TrainResult train(const NetworkConfig& net_config, const TrainConfig& train_config,
                  std::span<const SamplePair> dataset) {
  net_config.validate();
  train_config.validate();
  check_dataset(net_config, dataset, true);

  const auto started = std::chrono::steady_clock::now();
  Trainer trainer(Wfanet::create(net_config), train_config);
  Rng shuffle_rng(train_config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  report.seed = train_config.seed;
  std::vector<const SamplePair*> batch;
  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    const double lr = learning_rate_at(train_config, epoch);
    double epoch_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      batch.clear();
      for (std::size_t j = start; j < std::min(order.size(), start + train_config.batch_size); ++j) {
        batch.push_back(&dataset[order[j]]);
      }
      epoch_total += trainer.step(batch, lr);
      ++batches;
      ++report.steps;
    }
    report.loss_history.push_back(epoch_total / static_cast<double>(batches));
  }
  report.params_checksum = trainer.network().params().checksum();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {trainer.network(), report};
}

Raster fuse(const Wfanet& network, const Raster& pan, const Raster& lrms) {
  NoGradGuard no_grad;
  return Raster::from_tensor(network.forward(pan.to_tensor(), lrms.to_tensor()), lrms.bit_depth).clamped();
}

std::vector<MetricsReport> evaluate(const Predictor& predict, std::span<const SamplePair> dataset,
                                    EvalMode mode, std::size_t ratio, double blur_sigma) {
  std::vector<MetricsReport> reports;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const SamplePair& s = dataset[i];
    const Raster prediction = predict(s);
    if (mode == EvalMode::kReduced) {
      if (!s.gt) throw ConfigError("sample " + std::to_string(i) + ": reduced-resolution evaluation needs gt");
      reports.push_back(reduced_resolution_report(*s.gt, prediction, ratio));
    } else {
      reports.push_back(full_resolution_report(prediction, s.lrms, s.pan, ratio, blur_sigma));
    }
  }
  return reports;
}

std::vector<MetricsReport> evaluate(const Wfanet& network, std::span<const SamplePair> dataset, EvalMode mode) {
  check_dataset(network.config(), dataset, mode == EvalMode::kReduced);
  const std::size_t ratio = network.config().ratio;
  return evaluate([&network](const SamplePair& s) { return fuse(network, s.pan, s.lrms); }, dataset, mode, ratio,
                  default_blur_sigma(ratio));
}

double mean_l1(const Wfanet& network, std::span<const SamplePair> dataset) {
  check_dataset(network.config(), dataset, true);
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : dataset) {
    const Tensor pred = network.forward(s.pan.to_tensor(), s.lrms.to_tensor());
    total += l1_loss(pred, s.gt->to_tensor()).item();
  }
  return total / static_cast<double>(dataset.size());
}

}  // namespace wfanet
