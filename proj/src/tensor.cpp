// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wfanet/error.hpp"

namespace wfanet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<float>{value}, requires_grad);
}

float Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->data[0];
}

std::span<float> Tensor::mutable_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const float> g) const {
  if (g.size() != numel()) throw DimensionError("gradient size mismatch");
  auto dst = mutable_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data, false);
}

// ---------------------------------------------------------------------------

void Tape::record(std::vector<Tensor> outputs, std::function<void()> backward) {
  entries_.push_back(Entry{std::move(outputs), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  auto produced_loss = [&](const Entry& e) {
    return std::any_of(e.outputs.begin(), e.outputs.end(),
                       [&](const Tensor& t) { return t.same_storage(loss); });
  };
  auto it = std::find_if(entries_.rbegin(), entries_.rend(), produced_loss);
  if (it == entries_.rend()) {
    throw ContractError(
        "loss was not produced by a recorded operation (backward already ran, or nothing requires grad)");
  }
  Tensor seed = loss;
  seed.accumulate_grad(std::vector<float>{1.0f});
  for (; it != entries_.rend(); ++it) {
    bool any = std::any_of(it->outputs.begin(), it->outputs.end(),
                           [](const Tensor& t) { return t.has_grad(); });
    if (any) it->backward();
  }
  clear();
}

void Tape::clear() { entries_.clear(); }

Tape& active_tape() {
  thread_local Tape tape;
  return tape;
}

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_checked = false;
thread_local std::vector<signed char>* g_kinks = nullptr;

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_checked_mode(bool enabled) { g_checked = enabled; }
bool checked_mode() { return g_checked; }

CheckedModeGuard::CheckedModeGuard(bool enabled) : previous_(g_checked) { g_checked = enabled; }
CheckedModeGuard::~CheckedModeGuard() { g_checked = previous_; }

KinkRecorder::KinkRecorder() : previous_(g_kinks) { g_kinks = &pattern_; }
KinkRecorder::~KinkRecorder() { g_kinks = previous_; }

void backward(const Tensor& loss) { active_tape().backward(loss); }

namespace ops {

void note_kinks(std::span<const float> values) {
  if (!g_kinks) return;
  for (float v : values) g_kinks->push_back(static_cast<signed char>((v > 0.0f) - (v < 0.0f)));
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->defined() && t->requires_grad(); });
}

void check_finite(const Tensor& t, const char* op_name) {
  if (!g_checked) return;
  std::size_t bad = 0;
  for (float v : t.data()) bad += std::isfinite(v) ? 0 : 1;
  if (bad) {
    throw NumericError(std::string(op_name) + " produced " + std::to_string(bad) +
                       " non-finite values");
  }
}

}  // namespace ops

namespace {

using ops::check_finite;
using ops::should_record;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

Tensor finish(Tensor out, const char* op) {
  check_finite(out, op);
  return out;
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    const float* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k x n] += A^T * B with A[m x k], B[m x n]
void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t p = 0; p < m; ++p) {
    const float* arow = a + p * k;
    const float* brow = b + p * n;
    for (std::size_t i = 0; i < k; ++i) {
      const float av = arow[i];
      float* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

std::vector<float> transposed(std::span<const float> src, std::size_t rows, std::size_t cols) {
  std::vector<float> dst(src.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  return dst;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, b, out]() mutable {
      if (a.requires_grad()) a.accumulate_grad(out.grad());
      if (b.requires_grad()) b.accumulate_grad(out.grad());
    });
  }
  return finish(out, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return finish(out, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto y = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
    });
  }
  return finish(out, "mul");
}

Tensor scale(const Tensor& a, float factor) {
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
  if (should_record({&a})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, out, factor]() mutable {
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return finish(out, "scale");
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  if (should_record({&a})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, out]() mutable {
      const float g = out.grad()[0];
      for (float& v : a.mutable_grad()) v += g;
    });
  }
  return finish(out, "sum");
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out(Shape{m, n});
  gemm_nn(a.data().data(), b.data().data(), out.mutable_data().data(), m, k, n);
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, b, out, m, k, n]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        // dA = dC * B^T
        auto bt = transposed(b.data(), k, n);
        gemm_nn(g.data(), bt.data(), a.mutable_grad().data(), m, n, k);
      }
      if (b.requires_grad()) {
        // dB = A^T * dC
        gemm_tn(a.data().data(), g.data(), b.mutable_grad().data(), m, k, n);
      }
    });
  }
  return finish(out, "matmul");
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects a 2-D tensor, got " + shape_to_string(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out(Shape{cols, rows}, transposed(a.data(), rows, cols));
  if (should_record({&a})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, out, rows, cols]() mutable {
      auto back = transposed(out.grad(), cols, rows);
      a.accumulate_grad(back);
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<float>(a.data().begin(), a.data().end()));
  if (should_record({&a})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [a, out]() mutable { a.accumulate_grad(out.grad()); });
  }
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_row_bias: " + shape_to_string(x.shape()) + " with bias " +
                         shape_to_string(bias.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xv = x.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) o[i * cols + j] = xv[i * cols + j] + bv[j];
  if (should_record({&x, &bias})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, bias, out, rows, cols]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) x.accumulate_grad(g);
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gb[j] += g[i * cols + j];
      }
    });
  }
  return finish(out, "add_row_bias");
}

namespace {

// out[co] += w * shifted(in[ci]) for a single tap, zero padded.
inline void conv_tap(const float* in, float* out, float w, std::size_t h, std::size_t wd,
                     int dy, int dx) {
  const int H = static_cast<int>(h), W = static_cast<int>(wd);
  const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
  for (int y = y0; y < y1; ++y) {
    float* orow = out + y * W;
    const float* irow = in + (y + dy) * W + dx;
    for (int x = x0; x < x1; ++x) orow[x] += w * irow[x];
  }
}

inline double conv_tap_dot(const float* in, const float* g, std::size_t h, std::size_t wd, int dy,
                           int dx) {
  const int H = static_cast<int>(h), W = static_cast<int>(wd);
  const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
  double acc = 0.0;
  for (int y = y0; y < y1; ++y) {
    const float* grow = g + y * W;
    const float* irow = in + (y + dy) * W + dx;
    float row = 0.0f;
    for (int x = x0; x < x1; ++x) row += grow[x] * irow[x];
    acc += row;
  }
  return acc;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3) throw DimensionError("conv2d: input must be [C x H x W], got " + shape_to_string(x.shape()));
  if (weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3) {
    throw DimensionError("conv2d: weight must be [Cout x Cin x 3 x 3], got " + shape_to_string(weight.shape()));
  }
  if (weight.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d: input has " + std::to_string(x.dim(0)) + " channels but weight " +
                         shape_to_string(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = weight.dim(0);
  const std::size_t plane = h * w;
  Tensor out(Shape{cout, h, w});
  auto o = out.mutable_data();
  auto xv = x.data();
  auto wv = weight.data();
  auto bv = bias.data();
  for (std::size_t co = 0; co < cout; ++co) {
    float* oplane = o.data() + co * plane;
    std::fill(oplane, oplane + plane, bv[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const float* iplane = xv.data() + ci * plane;
      const float* k = wv.data() + (co * cin + ci) * 9;
      for (int t = 0; t < 9; ++t) conv_tap(iplane, oplane, k[t], h, w, t / 3 - 1, t % 3 - 1);
    }
  }
  if (should_record({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, weight, bias, out, cin, cout, h, w, plane]() mutable {
      auto g = out.grad();
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t co = 0; co < cout; ++co) {
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += g[co * plane + i];
          gb[co] += static_cast<float>(acc);
        }
      }
      if (weight.requires_grad()) {
        auto gw = weight.mutable_grad();
        auto xv = x.data();
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (int t = 0; t < 9; ++t)
              gw[(co * cin + ci) * 9 + t] += static_cast<float>(conv_tap_dot(
                  xv.data() + ci * plane, g.data() + co * plane, h, w, t / 3 - 1, t % 3 - 1));
      }
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        auto wv = weight.data();
        // Transposed correlation: shift the output gradient back by the tap offset.
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const float* k = wv.data() + (co * cin + ci) * 9;
            for (int t = 0; t < 9; ++t)
              conv_tap(g.data() + co * plane, gx.data() + ci * plane, k[t], h, w,
                       -(t / 3 - 1), -(t % 3 - 1));
          }
      }
    });
  }
  return finish(out, "conv2d");
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("softmax: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data() + r * n;
    float* dst = o.data() + r * n;
    const float mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(in[j] - mx);
      total += dst[j];
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::size_t j = 0; j < n; ++j) dst[j] *= inv;
  }
  if (should_record({&x})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, out, rows, n]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j] * y[base + j];
        const float d = static_cast<float>(dot);
        for (std::size_t j = 0; j < n; ++j) gx[base + j] += y[base + j] * (g[base + j] - d);
      }
    });
  }
  return finish(out, "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t c = x.shape().back();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != c || beta.dim(0) != c) {
    throw DimensionError("layer_norm: feature width " + std::to_string(c) + " but gamma " +
                         shape_to_string(gamma.shape()) + " and beta " + shape_to_string(beta.shape()));
  }
  if (!(eps > 0.0f)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / c;
  Tensor out(x.shape());
  std::vector<float> xhat(x.numel());
  std::vector<float> inv_std(rows);
  auto o = out.mutable_data();
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = xv.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += in[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<float>(is);
    for (std::size_t j = 0; j < c; ++j) {
      const float xh = static_cast<float>((in[j] - mu) * is);
      xhat[r * c + j] = xh;
      o[r * c + j] = xh * gv[j] + bv[j];
    }
  }
  if (should_record({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, gamma, beta, out, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std), rows, c]() mutable {
      auto g = out.grad();
      if (gamma.requires_grad() || beta.requires_grad()) {
        std::vector<double> dg(c, 0.0), db(c, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            dg[j] += g[r * c + j] * xhat[r * c + j];
            db[j] += g[r * c + j];
          }
        if (gamma.requires_grad()) {
          auto gg = gamma.mutable_grad();
          for (std::size_t j = 0; j < c; ++j) gg[j] += static_cast<float>(dg[j]);
        }
        if (beta.requires_grad()) {
          auto gb = beta.mutable_grad();
          for (std::size_t j = 0; j < c; ++j) gb[j] += static_cast<float>(db[j]);
        }
      }
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        auto gv = gamma.data();
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double dxh = static_cast<double>(g[r * c + j]) * gv[j];
            m1 += dxh;
            m2 += dxh * xhat[r * c + j];
          }
          m1 /= static_cast<double>(c);
          m2 /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const double dxh = static_cast<double>(g[r * c + j]) * gv[j];
            gx[r * c + j] += static_cast<float>(inv_std[r] * (dxh - m1 - xhat[r * c + j] * m2));
          }
        }
      }
    });
  }
  return finish(out, "layer_norm");
}

Tensor activation(const Tensor& x, Activation kind) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xv = x.data();
  if (kind == Activation::kSigmoid) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      const float v = xv[i];
      // Branch on sign so exp never overflows.
      if (v >= 0.0f) {
        o[i] = 1.0f / (1.0f + std::exp(-v));
      } else {
        const float e = std::exp(v);
        o[i] = e / (1.0f + e);
      }
    }
  } else {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    ops::note_kinks(xv);
  }
  if (should_record({&x})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, out, kind]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      if (kind == Activation::kSigmoid) {
        auto y = out.data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0f - y[i]);
      } else {
        auto xv = x.data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0f ? g[i] : 0.0f;
      }
    });
  }
  return finish(out, kind == Activation::kSigmoid ? "sigmoid" : "relu");
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  auto p = pred.data();
  auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(static_cast<double>(p[i]) - t[i]);
  if (g_kinks) {
    std::vector<float> residual(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) residual[i] = p[i] - t[i];
    ops::note_kinks(residual);
  }
  const std::size_t n = p.size();
  Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
  if (should_record({&pred, &target})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [pred, target, out, n]() mutable {
      const float g = out.grad()[0] / static_cast<float>(n);
      auto p = pred.data();
      auto t = target.data();
      auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
      if (pred.requires_grad()) {
        auto gp = pred.mutable_grad();
        for (std::size_t i = 0; i < n; ++i) gp[i] += g * sign(p[i] - t[i]);
      }
      if (target.requires_grad()) {
        auto gt = target.mutable_grad();
        for (std::size_t i = 0; i < n; ++i) gt[i] -= g * sign(p[i] - t[i]);
      }
    });
  }
  return finish(out, "l1_loss");
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const auto& first = parts.front();
  if (first.rank() != 3) throw DimensionError("concat_channels: inputs must be [C x H x W]");
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.rank() != 3 || p.dim(1) != first.dim(1) || p.dim(2) != first.dim(2)) {
      throw DimensionError("concat_channels: spatial mismatch " + shape_to_string(first.shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    channels += p.dim(0);
  }
  std::vector<float> values;
  values.reserve(channels * first.dim(1) * first.dim(2));
  for (const auto& p : parts) values.insert(values.end(), p.data().begin(), p.data().end());
  Tensor out(Shape{channels, first.dim(1), first.dim(2)}, std::move(values));
  bool record = false;
  if (grad_enabled()) {
    for (const auto& p : parts) record = record || p.requires_grad();
  }
  if (record) {
    out.set_requires_grad(true);
    active_tape().record({out}, [parts, out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) p.accumulate_grad(g.subspan(offset, p.numel()));
        offset += p.numel();
      }
    });
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  if (x.rank() != 3) throw DimensionError("upsample_nearest: input must be [C x H x W]");
  if (factor == 0) throw ContractError("upsample_nearest: factor must be positive");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h * factor, ow = w * factor;
  Tensor out(Shape{c, oh, ow});
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        o[(ch * oh + y) * ow + xx] = xv[(ch * h + y / factor) * w + xx / factor];
  if (should_record({&x})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, out, c, h, w, oh, ow, factor]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            gx[(ch * h + y / factor) * w + xx / factor] += g[(ch * oh + y) * ow + xx];
    });
  }
  return out;
}

Tensor subsample2(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) % 2 || x.dim(2) % 2) {
    throw DimensionError("subsample2: input must be [C x H x W] with even extents, got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(Shape{c, oh, ow});
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) o[(ch * oh + y) * ow + xx] = xv[(ch * h + 2 * y) * w + 2 * xx];
  if (should_record({&x})) {
    out.set_requires_grad(true);
    active_tape().record({out}, [x, out, c, h, w, oh, ow]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            gx[(ch * h + 2 * y) * w + 2 * xx] += g[(ch * oh + y) * ow + xx];
    });
  }
  return out;
}

Tensor to_tokens(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("to_tokens: input must be [C x H x W], got " + shape_to_string(x.shape()));
  return transpose(reshape(x, Shape{x.dim(0), x.dim(1) * x.dim(2)}));
}

Tensor from_tokens(const Tensor& tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 2 || tokens.dim(0) != height * width) {
    throw DimensionError("from_tokens: " + shape_to_string(tokens.shape()) + " cannot form a " +
                         std::to_string(height) + " x " + std::to_string(width) + " grid");
  }
  return reshape(transpose(tokens), Shape{tokens.dim(1), height, width});
}

}  // namespace wfanet
