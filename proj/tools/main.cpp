// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/cli.hpp"

int main(int argc, char** argv) { return wfanet::cli::run(argc, argv); }
