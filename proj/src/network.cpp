// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/network.hpp"

#include <type_traits>

#include "wfanet/error.hpp"
#include "wfanet/wavelet.hpp"

namespace wfanet {

void NetworkConfig::validate() const {
  if (channels == 0) throw ConfigError("channels must be positive");
  if (ms_bands == 0) throw ConfigError("ms_bands must be positive");
  if (scales == 0 || scales > 8) throw ConfigError("scales must be in [1, 8]");
  if (ratio != (std::size_t{1} << scales)) {
    throw ConfigError("ratio " + std::to_string(ratio) + " must equal 2^scales = " +
                      std::to_string(std::size_t{1} << scales));
  }
  if (fab_count == 0) throw ConfigError("fab_count must be positive");
  if (mlp_hidden_factor == 0) throw ConfigError("mlp_hidden_factor must be positive");
  const bool ablated = query_ablation || key_ablation || value_ablation;
  if (ablated && triplet_permutation != TripletPermutation::kOurs) {
    throw ConfigError("triplet ablations require the default triplet_permutation");
  }
  if (!use_mffa_attention && (ablated || triplet_permutation != TripletPermutation::kOurs)) {
    throw ConfigError("triplet options require use_mffa_attention");
  }
}

MffaOptions NetworkConfig::mffa_options() const {
  MffaOptions o;
  o.channels = channels;
  o.hidden_factor = mlp_hidden_factor;
  o.use_attention = use_mffa_attention;
  o.permutation = triplet_permutation;
  o.query_ablation = query_ablation;
  o.key_ablation = key_ablation;
  o.value_ablation = value_ablation;
  return o;
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"scales", scales},
          {"channels", channels},
          {"ms_bands", ms_bands},
          {"ratio", ratio},
          {"fab_count", fab_count},
          {"mlp_hidden_factor", mlp_hidden_factor},
          {"use_sdem", use_sdem},
          {"use_mffa_attention", use_mffa_attention},
          {"multi_scale", multi_scale},
          {"detail_block", to_string(detail_block)},
          {"triplet_permutation", to_string(triplet_permutation)},
          {"query_ablation", query_ablation},
          {"key_ablation", key_ablation},
          {"value_ablation", value_ablation},
          {"seed", seed}};
}

const std::vector<std::string>& NetworkConfig::json_keys() {
  static const std::vector<std::string> keys = {
      "scales",         "channels",          "ms_bands",       "ratio",         "fab_count",
      "mlp_hidden_factor", "use_sdem",       "use_mffa_attention", "multi_scale", "detail_block",
      "triplet_permutation", "query_ablation", "key_ablation", "value_ablation", "seed"};
  return keys;
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) { return from_json(j, NetworkConfig{}); }

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j, NetworkConfig c) {
  if (!j.is_object()) throw ConfigError("network config must be a JSON object");
  try {
    auto take = [&j](const char* key, auto& field) {
      using T = std::remove_reference_t<decltype(field)>;
      if (!j.contains(key)) return;
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        const auto& v = j.at(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.template get<std::int64_t>() < 0)) {
          throw ConfigError(std::string(key) + " must be a non-negative integer");
        }
      }
      field = j.at(key).get<T>();
    };
    take("scales", c.scales);
    take("channels", c.channels);
    take("ms_bands", c.ms_bands);
    take("ratio", c.ratio);
    take("fab_count", c.fab_count);
    take("mlp_hidden_factor", c.mlp_hidden_factor);
    take("use_sdem", c.use_sdem);
    take("use_mffa_attention", c.use_mffa_attention);
    take("multi_scale", c.multi_scale);
    take("query_ablation", c.query_ablation);
    take("key_ablation", c.key_ablation);
    take("value_ablation", c.value_ablation);
    take("seed", c.seed);
    if (j.contains("detail_block")) c.detail_block = parse_detail_block(j.at("detail_block").get<std::string>());
    if (j.contains("triplet_permutation")) {
      c.triplet_permutation = parse_permutation(j.at("triplet_permutation").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid network config value: ") + e.what());
  }
  return c;
}

Wfanet Wfanet::create(const NetworkConfig& config) {
  config.validate();
  Wfanet net;
  net.config_ = config;
  Rng rng(config.seed);
  const std::size_t c = config.channels;
  net.pan_stem_ = Conv3x3::create(net.params_, "stem.pan", 1, c, rng);
  net.ms_stem_ = Conv3x3::create(net.params_, "stem.ms", config.ms_bands, c, rng);
  for (std::size_t k = 0; k < config.fusion_steps(); ++k) {
    const std::string prefix = "scale" + std::to_string(k);
    ScaleModules modules;
    modules.mffa = MffaParams::create(net.params_, prefix + ".mffa", config.mffa_options(), rng);
    if (config.use_sdem) {
      modules.sdem = SdemParams::create(net.params_, prefix + ".sdem", c, config.fab_count, config.detail_block, rng);
    }
    net.scales_.push_back(std::move(modules));
  }
  net.head_ = Conv3x3::create(net.params_, "head", c, config.ms_bands, rng);
  return net;
}

Wfanet Wfanet::load(const std::filesystem::path& path) {
  LoadedParams loaded = load_params(path);
  Wfanet net = create(NetworkConfig::from_json(loaded.config));
  net.params_.copy_values_from(loaded.params);
  return net;
}

void Wfanet::save(const std::filesystem::path& path) const { save_params(path, params_, config_.to_json()); }

Tensor Wfanet::scale_step(std::size_t step, const Tensor& ms_features, const Tensor& pan_features) const {
  const ScaleModules& modules = scales_.at(step);
  Tensor fused = mffa_forward(pan_features, ms_features, modules.mffa);
  if (modules.sdem) fused = add(fused, sdem_forward(pan_features, *modules.sdem));
  return fused;
}

Tensor Wfanet::forward(const Tensor& pan, const Tensor& lrms) const {
  if (pan.rank() != 3 || pan.dim(0) != 1) {
    throw DimensionError("forward: PAN must be [1 x H x W], got " + shape_to_string(pan.shape()));
  }
  if (lrms.rank() != 3 || lrms.dim(0) != config_.ms_bands) {
    throw DimensionError("forward: LRMS must be [" + std::to_string(config_.ms_bands) + " x h x w], got " +
                         shape_to_string(lrms.shape()));
  }
  const std::size_t r = config_.ratio;
  if (pan.dim(1) != r * lrms.dim(1) || pan.dim(2) != r * lrms.dim(2)) {
    throw DimensionError("forward: PAN " + shape_to_string(pan.shape()) + " is not " + std::to_string(r) +
                         "x the extent of LRMS " + shape_to_string(lrms.shape()));
  }

  const Tensor pan_features = pan_stem_(pan);
  Tensor ms_features = ms_stem_(lrms);
  if (config_.multi_scale) {
    const WaveletPyramid pyramid = build_pyramid(pan_features, config_.scales);
    for (std::size_t k = 0; k < config_.scales; ++k) ms_features = scale_step(k, ms_features, pyramid[k]);
  } else {
    ms_features = upsample_nearest(ms_features, r / 2);
    ms_features = scale_step(0, ms_features, pan_features);
  }
  return head_(ms_features);
}

ParamStore init_params(const NetworkConfig& config) { return Wfanet::create(config).params(); }

}  // namespace wfanet
