// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>

#include "wfanet/error.hpp"
#include "wfanet/network.hpp"
#include "wfanet/rng.hpp"

namespace wfanet {

namespace {

double evaluate(const ScalarProgram& f, std::vector<signed char>* pattern) {
  NoGradGuard no_grad;
  KinkRecorder recorder;
  const Tensor y = f();
  if (y.rank() != 0) throw ContractError("grad_check: program must return a scalar, got " + shape_to_string(y.shape()));
  if (pattern) *pattern = recorder.pattern();
  return y.item();
}

struct Estimate {
  double slope = 0.0;
  double standard_error = 0.0;
  /// Lag-1 autocorrelation of the residuals ordered by offset.
  double residual_correlation = 0.0;
};

constexpr std::size_t kPolynomialDegree = 6;
constexpr std::size_t kHingeDegree = 3;
constexpr std::size_t kMaxKinks = 32;
// Residual autocorrelation above this many white-noise standard deviations
// (about 1/sqrt(n) each) marks the model as inadequate at the current step.
constexpr double kMisfitCorrelation = 3.0;
constexpr std::size_t kEarlyStopPairs = 128;

/// Least-squares fit of f(t) = sum_p c_p t^p + sum_i sum_q d_iq h_i(t)^q with
/// hinges h_i(t) = max(0, sign(tau_i) (t - tau_i)), returning c_1 / step and
/// its standard error.
std::optional<Estimate> fit_slope(const std::vector<double>& t, const std::vector<double>& f,
                                  const std::vector<double>& kinks, std::size_t hinge_degree, double step) {
  const std::size_t n = t.size();
  const std::size_t m = kPolynomialDegree + 1 + hinge_degree * kinks.size();
  if (n < m + 4) return std::nullopt;
  auto row = [&](double x, std::vector<double>& out) {
    out.clear();
    double power = 1.0;
    for (std::size_t p = 0; p <= kPolynomialDegree; ++p, power *= x) out.push_back(power);
    for (double tau : kinks) {
      const double h = std::max(0.0, (tau > 0 ? 1.0 : -1.0) * (x - tau));
      double hp = h;
      for (std::size_t q = 0; q < hinge_degree; ++q, hp *= h) out.push_back(hp);
    }
  };
  // Gauss-Jordan on [X^T X | X^T f | e_1].
  const std::size_t width = m + 2;
  std::vector<double> aug(m * width, 0.0), r;
  for (std::size_t k = 0; k < n; ++k) {
    row(t[k], r);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) aug[i * width + j] += r[i] * r[j];
      aug[i * width + m] += r[i] * f[k];
    }
  }
  aug[1 * width + m + 1] = 1.0;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t pivot = c;
    for (std::size_t i = c + 1; i < m; ++i)
      if (std::abs(aug[i * width + c]) > std::abs(aug[pivot * width + c])) pivot = i;
    if (std::abs(aug[pivot * width + c]) < 1e-300) return std::nullopt;
    for (std::size_t j = 0; j < width; ++j) std::swap(aug[c * width + j], aug[pivot * width + j]);
    const double d = aug[c * width + c];
    for (std::size_t j = 0; j < width; ++j) aug[c * width + j] /= d;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == c) continue;
      const double factor = aug[i * width + c];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < width; ++j) aug[i * width + j] -= factor * aug[c * width + j];
    }
  }
  std::vector<std::pair<double, double>> residuals;
  double rss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    row(t[k], r);
    double fit = 0.0;
    for (std::size_t i = 0; i < m; ++i) fit += aug[i * width + m] * r[i];
    residuals.emplace_back(t[k], f[k] - fit);
    rss += (f[k] - fit) * (f[k] - fit);
  }
  std::sort(residuals.begin(), residuals.end());
  double lagged = 0.0;
  for (std::size_t k = 1; k < n; ++k) lagged += residuals[k].second * residuals[k - 1].second;
  const double variance = rss / static_cast<double>(n - m);
  const double inverse_11 = aug[1 * width + m + 1];
  if (!(inverse_11 > 0.0)) return std::nullopt;
  return Estimate{aug[1 * width + m] / step, std::sqrt(variance * inverse_11) / step,
                  rss > 0.0 ? lagged / rss : 0.0};
}

}  // namespace

namespace {

/// Samples of f along one coordinate at offsets t * step, plus the kink
/// locations (in units of step) found between them.
struct LineSamples {
  std::vector<double> t{0.0};
  std::vector<double> f;
  std::vector<double> kinks;
  bool too_many_kinks = false;
};

class LineProbe {
 public:
  LineProbe(const ScalarProgram& f, std::span<float> values, std::size_t index, double step,
            const std::vector<signed char>& base_pattern)
      : f_(f), values_(values), index_(index), original_(values[index]), step_(step), base_(base_pattern) {}

  /// Evaluates f at original + offset * step; returns the applied offset.
  std::pair<double, double> at(double offset, std::vector<signed char>& pattern) {
    values_[index_] = static_cast<float>(original_ + offset * step_);
    const double applied = (static_cast<double>(values_[index_]) - original_) / step_;
    const double value = evaluate(f_, &pattern);
    values_[index_] = original_;
    return {applied, value};
  }

  /// Grid t = +-2k/M, k = 1..M. The first pass walks outward from zero and
  /// bisects every branch change; later passes add the odd-k midpoints.
  void extend(LineSamples& s, std::size_t pairs, bool first_pass) {
    std::vector<signed char> pattern, mid_pattern;
    for (double side : {1.0, -1.0}) {
      std::vector<signed char> previous_pattern = base_;
      double previous_offset = 0.0;
      for (std::size_t k = 1; k <= pairs && !s.too_many_kinks; ++k) {
        if (!first_pass && k % 2 == 0) continue;
        const double offset = side * 2.0 * static_cast<double>(k) / static_cast<double>(pairs);
        const auto [applied, value] = at(offset, pattern);
        if (first_pass && pattern != previous_pattern) locate_kinks(s, previous_offset, offset, previous_pattern, pattern);
        s.t.push_back(applied);
        s.f.push_back(value);
        if (first_pass) {
          previous_pattern = pattern;
          previous_offset = offset;
        }
      }
    }
  }

 private:
  void locate_kinks(LineSamples& s, double lo, double hi, const std::vector<signed char>& plo,
                    const std::vector<signed char>& phi) {
    struct Span {
      double lo, hi;
      std::vector<signed char> plo, phi;
    };
    std::vector<Span> pending{{lo, hi, plo, phi}};
    std::vector<signed char> mid_pattern;
    const double resolution = 1e-7 * std::max(1.0, std::abs(static_cast<double>(original_))) / step_;
    while (!pending.empty() && !s.too_many_kinks) {
      Span sp = std::move(pending.back());
      pending.pop_back();
      if (sp.plo == sp.phi) continue;
      if (std::abs(sp.hi - sp.lo) < resolution) {
        s.kinks.push_back(0.5 * (sp.lo + sp.hi));
        s.too_many_kinks = s.kinks.size() > kMaxKinks;
        continue;
      }
      const double mid = 0.5 * (sp.lo + sp.hi);
      at(mid, mid_pattern);
      pending.push_back({mid, sp.hi, mid_pattern, sp.phi});
      pending.push_back({sp.lo, mid, sp.plo, mid_pattern});
    }
  }

  const ScalarProgram& f_;
  std::span<float> values_;
  std::size_t index_;
  float original_;
  double step_;
  const std::vector<signed char>& base_;
};

}  // namespace

GradCheckResult grad_check_detailed(const ScalarProgram& f, std::vector<Tensor> inputs, double eps,
                                    double agreement) {
  if (!(eps >= kMinGradCheckStep && eps <= 1e-2)) throw ContractError("grad_check: eps must lie in [1e-4, 1e-2]");
  std::vector<bool> previous;
  for (auto& t : inputs) {
    previous.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  active_tape().clear();
  const Tensor y = f();
  if (y.rank() != 0) {
    active_tape().clear();
    throw ContractError("grad_check: program must return a scalar, got " + shape_to_string(y.shape()));
  }
  if (y.requires_grad()) backward(y);
  else active_tape().clear();

  std::vector<signed char> base_pattern;
  const double base_value = evaluate(f, &base_pattern);
  auto relative_se = [](const Estimate& e) { return e.standard_error / std::max(1.0, std::abs(e.slope)); };

  GradCheckResult worst;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& t = inputs[i];
    const std::vector<float> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      // Refine the grid while the fit is noise-limited. A smooth misfit shows
      // up as correlated residuals and sends the search to a shorter step;
      // shorter steps cannot help a fit limited by noise alone.
      std::optional<Estimate> best;
      bool any_fit = false;
      for (double step = eps; step >= kMinGradCheckStep * (1 - 1e-9); step /= std::sqrt(10.0)) {
        LineProbe probe(f, values, j, step, base_pattern);
        LineSamples samples;
        samples.f.push_back(base_value);
        bool misfit = false;
        for (std::size_t pairs = kGradCheckPairs; pairs <= kMaxGradCheckPairs; pairs *= 2) {
          probe.extend(samples, pairs, pairs == kGradCheckPairs);
          if (samples.too_many_kinks) break;
          const double n = static_cast<double>(samples.t.size());
          auto misfits = [&](const Estimate& e) { return e.residual_correlation > kMisfitCorrelation / std::sqrt(n); };
          const auto e = fit_slope(samples.t, samples.f, samples.kinks, kHingeDegree, step);
          if (!e) break;
          any_fit = true;
          Estimate candidate = *e;
          if (misfits(*e)) {
            // Correlated residuals: count them as a single observation.
            misfit = true;
            candidate.standard_error *= std::sqrt(n);
          }
          if (!best || relative_se(candidate) < relative_se(*best)) best = candidate;
          if (relative_se(*best) <= agreement || misfit) break;
          // Noise-limited: once the fit has ample residual degrees of freedom,
          // stop if even the full grid could not reach the target.
          const double reachable = relative_se(*best) * std::sqrt(static_cast<double>(pairs) / kMaxGradCheckPairs);
          if (pairs >= kEarlyStopPairs && reachable > agreement) break;
        }
        if (best && relative_se(*best) <= agreement) break;
        // Kinks sit at fixed positions, so a shorter step can leave them out of reach.
        if (!misfit && samples.kinks.empty() && !samples.too_many_kinks && best) break;
      }
      if (!best || relative_se(*best) > agreement) {
        ++(any_fit ? worst.unresolved : worst.kinked);
        continue;
      }
      const double a = analytic.empty() ? 0.0 : analytic[j];
      const double err = std::abs(a - best->slope) / std::max(1.0, std::abs(best->slope));
      if (worst.checked == 0 || err > worst.max_error) {
        worst.max_error = err;
        worst.input = i;
        worst.index = j;
        worst.analytic = a;
        worst.numeric = best->slope;
      }
      ++worst.checked;
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].zero_grad();
    inputs[i].set_requires_grad(previous[i]);
  }
  return worst;
}

double grad_check(const ScalarProgram& f, std::vector<Tensor> inputs, double eps) {
  return grad_check_detailed(f, std::move(inputs), eps).max_error;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// Values bounded away from zero so kinks stay out of reach of the stencil.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.mutable_data()) {
    const double mag = rng.uniform(0.1, 1.0);
    v = static_cast<float>(rng.below(2) ? mag : -mag);
  }
  return t;
}

/// sum((y - y0) * w) with a fixed random w, so every output element
/// matters. y0 is the first output seen, the unperturbed one; centering keeps
/// the scalar small so its float32 rounding stays below the stencil's signal.
struct Projection {
  Tensor weights;
  std::shared_ptr<Tensor> baseline = std::make_shared<Tensor>();

  Tensor operator()(const Tensor& y) const {
    if (!baseline->defined()) *baseline = y.clone();
    return sum(mul(sub(y, *baseline), weights));
  }
};

Projection projection_for(const Shape& shape, Rng& rng) { return {random_tensor(shape, rng)}; }

/// Random weights on only `nonzeros` output elements. Every element carries
/// float32 rounding noise, so a sparse cotangent keeps the scalar's noise at
/// the level of a few outputs while still reaching every input through the
/// network's global attention.
Projection sparse_projection_for(const Shape& shape, std::size_t nonzeros, Rng& rng) {
  Tensor dense = random_tensor(shape, rng);
  Tensor weights(shape);
  auto w = weights.mutable_data();
  for (std::size_t k = 0; k < nonzeros; ++k) {
    const std::size_t at = rng.below(w.size());
    w[at] = dense.data()[at];
  }
  return {weights};
}

}  // namespace

std::vector<GradCheckCase> gradient_battery(double tolerance, std::uint64_t seed) {
  constexpr double kBatteryStep = 1e-2;
  constexpr double kMaxUnverifiedFraction = 0.05;
  constexpr std::size_t kSparseOutputs = 8;
  // The largest of a few hundred noisy estimates lands near 3.5 standard
  // errors, so each estimate must be this many times sharper than the tolerance.
  constexpr double kAgreementDivisor = 6.0;
  Rng rng(seed);
  std::vector<GradCheckCase> cases;
  auto run = [&](std::string name, const ScalarProgram& f, std::vector<Tensor> inputs) {
    GradCheckCase c;
    c.name = std::move(name);
    c.result = grad_check_detailed(f, std::move(inputs), kBatteryStep, tolerance / kAgreementDivisor);
    const std::size_t total = c.result.checked + c.result.kinked + c.result.unresolved;
    c.passed = c.result.max_error <= tolerance && c.result.checked > 0 &&
               static_cast<double>(total - c.result.checked) <= kMaxUnverifiedFraction * static_cast<double>(total);
    cases.push_back(std::move(c));
  };

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    Projection p = projection_for({3, 4}, rng);
    run("add", [=] { return p(add(a, b)); }, {a, b});
    run("sub", [=] { return p(sub(a, b)); }, {a, b});
    run("mul", [=] { return p(mul(a, b)); }, {a, b});
    run("scale", [=] { return p(scale(a, -1.7f)); }, {a});
    run("sum", [=] { return sum(a); }, {a});
    run("mean", [=] { return mean(mul(a, a)); }, {a});
    run("transpose", [=] { return sum(mul(transpose(a), transpose(b))); }, {a, b});
    run("reshape", [=] { return p(reshape(mul(a, a), {3, 4})); }, {a});
  }
  {
    Tensor a = random_tensor({3, 5}, rng), b = random_tensor({5, 2}, rng), c = random_tensor({2, 4}, rng);
    Projection p = projection_for({3, 4}, rng);
    run("matmul", [=] { return p(matmul(matmul(a, b), c)); }, {a, b, c});
  }
  {
    Tensor x = random_tensor({6, 3}, rng), bias = random_tensor({3}, rng);
    Projection p = projection_for({6, 3}, rng);
    run("add_row_bias", [=] { return p(add_row_bias(x, bias)); }, {x, bias});
  }
  {
    Tensor x = random_tensor({2, 5, 4}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
    Projection p = projection_for({3, 5, 4}, rng);
    run("conv2d", [=] { return p(conv2d(x, w, b)); }, {x, w, b});
  }
  {
    Tensor x = random_tensor({4, 4}, rng, -2.0, 2.0), m = random_tensor({4, 4}, rng);
    Projection p = projection_for({4, 4}, rng);
    run("softmax", [=] { return p(softmax(x)); }, {x});
    run("softmax_matmul", [=] { return p(matmul(softmax(x), m)); }, {x, m});
  }
  {
    Tensor x = random_tensor({5, 6}, rng, -2.0, 2.0), g = random_tensor({6}, rng), b = random_tensor({6}, rng);
    Projection p = projection_for({5, 6}, rng);
    run("layer_norm", [=] { return p(layer_norm(x, g, b)); }, {x, g, b});
  }
  {
    Tensor x = away_from_zero({4, 5}, rng), t = random_tensor({4, 5}, rng);
    Projection p = projection_for({4, 5}, rng);
    run("sigmoid", [=] { return p(sigmoid(x)); }, {x});
    run("relu", [=] { return p(relu(x)); }, {x});
    Tensor target = Tensor(x.shape());
    {
      auto td = target.mutable_data();
      for (std::size_t i = 0; i < td.size(); ++i) td[i] = x.data()[i] + (rng.below(2) ? 0.3f : -0.3f);
    }
    run("l1_loss", [=] { return l1_loss(x, target); }, {x});
    (void)t;
  }
  {
    Tensor a = random_tensor({2, 4, 4}, rng), b = random_tensor({3, 4, 4}, rng);
    Projection p = projection_for({5, 4, 4}, rng);
    run("concat_channels", [=] { return p(concat_channels({a, b})); }, {a, b});
  }
  {
    Tensor x = random_tensor({2, 3, 3}, rng);
    Projection p = projection_for({2, 6, 6}, rng);
    run("upsample_nearest", [=] { return p(upsample_nearest(x, 2)); }, {x});
    Tensor y = random_tensor({2, 6, 6}, rng);
    Projection q = projection_for({2, 3, 3}, rng);
    run("subsample2", [=] { return q(subsample2(y)); }, {y});
  }
  {
    Tensor x = random_tensor({3, 2, 4}, rng);
    Projection p = projection_for({8, 3}, rng);
    run("to_tokens", [=] { return p(to_tokens(x)); }, {x});
    Tensor tok = random_tensor({8, 3}, rng);
    Projection q = projection_for({3, 2, 4}, rng);
    run("from_tokens", [=] { return q(from_tokens(tok, 2, 4)); }, {tok});
  }
  {
    Tensor x = random_tensor({2, 4, 6}, rng);
    std::array<Projection, 4> p;
    for (auto& pi : p) pi = projection_for({2, 2, 3}, rng);
    run("dwt2", [=] {
      const auto bands = dwt2(x).as_array();
      Tensor total = p[0](bands[0]);
      for (std::size_t i = 1; i < 4; ++i) total = add(total, p[i](bands[i]));
      return total;
    }, {x});
    std::array<Tensor, 4> bands;
    for (auto& b : bands) b = random_tensor({2, 2, 3}, rng);
    Projection q = projection_for({2, 4, 6}, rng);
    run("idwt2", [=] { return q(idwt2(WaveletBands::from_array(bands))); },
        {bands[0], bands[1], bands[2], bands[3]});
  }
  {
    Tensor q = random_tensor({6, 4}, rng), k = random_tensor({6, 4}, rng), v = random_tensor({6, 4}, rng);
    Projection p = projection_for({6, 4}, rng);
    run("scaled_attention", [=] { return p(scaled_attention(q, k, v)); }, {q, k, v});
  }

  // Modules at C=2, band grid 2x2.
  {
    Rng init(seed + 1);
    ParamStore store;
    MffaOptions opt;
    opt.channels = 2;
    MffaParams mffa = MffaParams::create(store, "mffa", opt, init);
    SdemParams fab = SdemParams::create(store, "fab", 2, 3, DetailBlock::kFab, init);
    SdemParams cb = SdemParams::create(store, "cb", 2, 3, DetailBlock::kConv, init);
    Tensor pan = random_tensor({2, 4, 4}, rng), ms = random_tensor({2, 2, 2}, rng);
    Projection p = projection_for({2, 4, 4}, rng);
    std::vector<Tensor> mffa_inputs = {pan, ms};
    for (const auto& name : store.names_with_prefix("mffa.")) mffa_inputs.push_back(store.at(name));
    run("mffa", [=] { return p(mffa_forward(pan, ms, mffa)); }, mffa_inputs);
    std::vector<Tensor> fab_inputs = {pan};
    for (const auto& name : store.names_with_prefix("fab.")) fab_inputs.push_back(store.at(name));
    run("sdem_fab", [=] { return p(sdem_forward(pan, fab)); }, fab_inputs);
    std::vector<Tensor> cb_inputs = {pan};
    for (const auto& name : store.names_with_prefix("cb.")) cb_inputs.push_back(store.at(name));
    run("sdem_cb", [=] { return p(sdem_forward(pan, cb)); }, cb_inputs);
  }

  // One fusion step and the full network: C=4, pan 16x16, lrms 2x4x4.
  {
    NetworkConfig cfg;
    cfg.channels = 4;
    cfg.ms_bands = 2;
    cfg.scales = 2;
    cfg.ratio = 4;
    cfg.seed = seed;
    const Wfanet net = Wfanet::create(cfg);
    Tensor ms_features = random_tensor({4, 4, 4}, rng), pan_features = random_tensor({4, 8, 8}, rng);
    Projection ps = sparse_projection_for({4, 8, 8}, kSparseOutputs, rng);
    run("scale_step", [=] { return ps(net.scale_step(0, ms_features, pan_features)); },
        {ms_features, pan_features});

    Tensor pan = random_tensor({1, 16, 16}, rng, 0.0, 1.0), lrms = random_tensor({2, 4, 4}, rng, 0.0, 1.0);
    Projection pn = sparse_projection_for({2, 16, 16}, kSparseOutputs, rng);
    run("wfanet", [=] { return pn(net.forward(pan, lrms)); }, {pan, lrms});
  }
  return cases;
}

}  // namespace wfanet
