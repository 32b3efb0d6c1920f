// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wfanet/tensor.hpp"

namespace wfanet {

/// A scalar-valued tensor program, re-evaluated for every perturbation.
using ScalarProgram = std::function<Tensor()>;

struct GradCheckResult {
  double max_error = 0.0;
  std::size_t input = 0;  // location of the worst element
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  /// Elements with a kink so close that no step leaves enough samples.
  std::size_t kinked = 0;
  /// Elements whose best estimate is too noisy to compare: float32 roundoff
  /// dominates every smooth step.
  std::size_t unresolved = 0;
};

inline constexpr double kMinGradCheckStep = 1e-4;
inline constexpr std::size_t kGradCheckPairs = 16;
inline constexpr std::size_t kMaxGradCheckPairs = 1024;

/// max over input elements of |analytic - numeric| / max(1, |numeric|).
///
/// numeric is a least-squares derivative along one coordinate. f is sampled
/// at x + t h on the grid t = +-2k/M, k = 1..M, starting at M = 16 and doubling
/// up to 1024. Relu and l1 branch changes between grid points are bisected to
/// their exact offsets, and each contributes hinge terms max(0, s (t - tau))^q,
/// q = 1..3, to a degree-6 polynomial fit; the slope at t = 0 and its standard
/// error come from the fit. Residuals that are serially correlated mark the
/// model as too coarse for the step, and their standard error is inflated to
/// that of a single sample. Steps eps, eps/sqrt(10), ... down to 1e-4 are tried
/// until the relative standard error drops to `agreement`. Elements that never
/// get there are counted as unresolved (or kinked, when no fit was possible)
/// and left out of the maximum.
GradCheckResult grad_check_detailed(const ScalarProgram& f, std::vector<Tensor> inputs, double eps = 1e-2,
                                    double agreement = 5e-4);
double grad_check(const ScalarProgram& f, std::vector<Tensor> inputs, double eps = 1e-2);

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
  bool passed = false;
};

/// A case passes when the max error is within `tolerance` and at most 5% of
/// its elements are kinked or unresolved. Each estimate must resolve to a
/// sixth of the tolerance. Network-level cases project onto a few output
/// elements, which keeps the float32 noise of the scalar low.
/// Every differentiable op, the wavelet pair, MFFA, SDEM, one fusion step and
/// the full network at C=4, pan 16x16, lrms 2x4x4.
std::vector<GradCheckCase> gradient_battery(double tolerance = 1e-3, std::uint64_t seed = 2024);

}  // namespace wfanet
