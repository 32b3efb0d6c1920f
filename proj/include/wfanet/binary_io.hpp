// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "wfanet/error.hpp"

// Little-endian primitives shared by the WFRS and WFPM formats.
namespace wfanet::binary_io {

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f32s(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      write_u32(out, bits);
    }
  }
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
  std::uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(what + ": truncated file");
  return to_little_endian(v);
}

inline std::uint64_t read_u64(std::istream& in, const std::string& what) {
  std::uint64_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(what + ": truncated file");
  return to_little_endian(v);
}

inline void read_f32s(std::istream& in, std::span<float> values, const std::string& what) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)))) {
    throw FormatError(what + ": truncated payload");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      bits = to_little_endian(bits);
      std::memcpy(&f, &bits, sizeof bits);
    }
  }
}

}  // namespace wfanet::binary_io
