// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wfanet/tensor.hpp"

namespace wfanet {

/// Named learnable tensors, iterated in lexicographic name order.
class ParamStore {
 public:
  /// Registers a new requires_grad tensor. Names must be unique.
  Tensor& add(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return tensors_.size(); }
  std::size_t total_elements() const;
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  /// Handles in name order; they share storage with the store.
  std::vector<Tensor> tensors() const;

  void zero_grad();

  /// FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const;

  /// Copies values from `other`, which must hold the same names and shapes.
  void copy_values_from(const ParamStore& other);

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

 private:
  std::map<std::string, Tensor> tensors_;
};

/// WFPM container: "WFPMv001", u64 little-endian header length, UTF-8 JSON
/// header {"config": ..., "tensors": [{"name", "shape", "offset"}]}, then
/// the little-endian float32 blob. Offsets are bytes from the blob start.
void save_params(const std::filesystem::path& path, const ParamStore& params,
                 const nlohmann::json& config = nlohmann::json::object());

struct LoadedParams {
  ParamStore params;
  nlohmann::json config;
};

LoadedParams load_params(const std::filesystem::path& path);

}  // namespace wfanet
