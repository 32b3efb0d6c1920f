// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "wfanet/binary_io.hpp"
#include "wfanet/error.hpp"

namespace wfanet {

namespace {

constexpr char kMagic[] = "WFPMv001";
constexpr std::size_t kMagicSize = 8;

}  // namespace

Tensor& ParamStore::add(const std::string& name, Tensor tensor) {
  if (name.empty()) throw ConfigError("parameter names must be nonempty");
  auto [it, inserted] = tensors_.emplace(name, std::move(tensor));
  if (!inserted) throw ConfigError("duplicate parameter name: " + name);
  it->second.set_requires_grad(true);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = tensors_.lower_bound(prefix); it != tensors_.end() && it->first.starts_with(prefix); ++it)
    out.push_back(it->first);
  return out;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : tensors_) out.push_back(t);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : tensors_) {
    feed(name.data(), name.size());
    for (std::size_t extent : t.shape()) {
      const std::uint64_t e = extent;
      feed(&e, sizeof e);
    }
    feed(t.data().data(), t.numel() * sizeof(float));
  }
  return h;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) {
    throw ConfigError("parameter count mismatch: expected " + std::to_string(size()) + ", got " +
                      std::to_string(other.size()));
  }
  for (auto& [name, t] : tensors_) {
    if (!other.contains(name)) throw ConfigError("missing parameter: " + name);
    const Tensor& src = other.at(name);
    if (src.shape() != t.shape()) {
      throw DimensionError("parameter " + name + " has shape " + shape_to_string(src.shape()) + ", expected " +
                           shape_to_string(t.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
  }
}

void save_params(const std::filesystem::path& path, const ParamStore& params,
                 const nlohmann::json& config) {
  nlohmann::json header;
  header["config"] = config;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(float);
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(kMagic, kMagicSize);
  binary_io::write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params) binary_io::write_f32s(out, t.data());
  if (!out) throw FormatError("failed writing " + path.string());
}

LoadedParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[kMagicSize];
  if (!in.read(magic, kMagicSize) || std::memcmp(magic, kMagic, kMagicSize) != 0) {
    throw FormatError(path.string() + ": not a WFPM parameter file (bad magic)");
  }
  const std::uint64_t header_size = binary_io::read_u64(in, path.string());
  if (header_size > (std::uint64_t{1} << 30)) throw FormatError(path.string() + ": implausible header length");
  std::string text(header_size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_size))) {
    throw FormatError(path.string() + ": truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": header is not valid JSON (" + e.what() + ")");
  }
  if (!header.contains("tensors") || !header["tensors"].is_array()) {
    throw FormatError(path.string() + ": header lacks a tensor table");
  }

  LoadedParams loaded;
  loaded.config = header.value("config", nlohmann::json::object());
  std::uint64_t expected_offset = 0;
  for (const auto& entry : header["tensors"]) {
    Shape shape;
    std::string name;
    std::uint64_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<Shape>();
      offset = entry.at("offset").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": malformed tensor entry (" + e.what() + ")");
    }
    if (offset != expected_offset) throw FormatError(path.string() + ": tensor " + name + " has unexpected offset");
    const std::size_t n = shape_numel(shape);
    std::vector<float> values(n);
    binary_io::read_f32s(in, values, path.string());
    expected_offset += n * sizeof(float);
    loaded.params.add(name, Tensor(shape, std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after blob");
  return loaded;
}

}  // namespace wfanet
