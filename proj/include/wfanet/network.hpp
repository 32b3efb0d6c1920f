// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "wfanet/mffa.hpp"
#include "wfanet/params.hpp"
#include "wfanet/sdem.hpp"

namespace wfanet {

struct NetworkConfig {
  std::size_t scales = 2;
  std::size_t channels = 32;
  std::size_t ms_bands = 8;
  std::size_t ratio = 4;  // must equal 2^scales
  std::size_t fab_count = 3;
  std::size_t mlp_hidden_factor = 2;

  bool use_sdem = true;
  bool use_mffa_attention = true;
  bool multi_scale = true;
  DetailBlock detail_block = DetailBlock::kFab;
  TripletPermutation triplet_permutation = TripletPermutation::kOurs;
  bool query_ablation = false;
  bool key_ablation = false;
  bool value_ablation = false;

  std::uint64_t seed = 0;

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  /// Number of fusion steps actually executed.
  std::size_t fusion_steps() const { return multi_scale ? scales : 1; }

  MffaOptions mffa_options() const;

  nlohmann::json to_json() const;
  /// Overrides fields present in `j`; other keys are ignored.
  static NetworkConfig from_json(const nlohmann::json& j, NetworkConfig base);
  static NetworkConfig from_json(const nlohmann::json& j);
  static const std::vector<std::string>& json_keys();
};

/// Learnables of one fusion step.
struct ScaleModules {
  MffaParams mffa;
  std::optional<SdemParams> sdem;
};

/// The assembled network. Copies share parameter storage.
class Wfanet {
 public:
  /// Seeded initialization; same config and seed give bit-identical params.
  static Wfanet create(const NetworkConfig& config);

  /// Rebuilds the network described by a WFPM file and loads its values.
  static Wfanet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const NetworkConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  /// pan: [1 x rH x rW], lrms: [B x H x W] -> [B x rH x rW].
  Tensor forward(const Tensor& pan, const Tensor& lrms) const;

  /// One progressive fusion step: MFFA output plus SDEM output.
  /// ms_features: [C x H x W], pan_features: [C x 2H x 2W].
  Tensor scale_step(std::size_t step, const Tensor& ms_features, const Tensor& pan_features) const;

  const ScaleModules& scale(std::size_t step) const { return scales_.at(step); }

 private:
  NetworkConfig config_;
  ParamStore params_;
  Conv3x3 pan_stem_;
  Conv3x3 ms_stem_;
  std::vector<ScaleModules> scales_;
  Conv3x3 head_;
};

/// Parameters of a freshly initialized network.
ParamStore init_params(const NetworkConfig& config);

}  // namespace wfanet
