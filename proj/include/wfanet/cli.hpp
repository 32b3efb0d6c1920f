// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <string>
#include <vector>

namespace wfanet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one command line. args[0] is the program name.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace wfanet::cli
