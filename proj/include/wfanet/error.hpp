// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <stdexcept>
#include <string>

namespace wfanet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Misuse of an API (backward twice, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File contents that parse but violate value constraints.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or undefined numeric results.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace wfanet
