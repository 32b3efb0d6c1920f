// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wfanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until the first gradient arrives
  bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major float32 array with an optional gradient slot.
///
/// Copies are shallow: two Tensor handles may refer to the same storage,
/// which is how parameter containers and the modules using them stay in
/// sync. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f, bool requires_grad = false);
  Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const float> data() const { return impl_->data; }
  std::span<float> mutable_data() { return impl_->data; }
  float item() const;
  float at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) const { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const float> grad() const { return impl_->grad; }
  // Gradient slots live in shared storage, so these act through const handles.
  std::span<float> mutable_grad() const;
  void zero_grad() const { impl_->grad.clear(); }
  void accumulate_grad(std::span<const float> g) const;

  /// Deep copy of the values, detached from any gradient history.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of differentiable operations executed on this thread.
class Tape {
 public:
  /// Registers an operation. `backward` reads the gradients of `outputs`
  /// and accumulates into the operation's inputs.
  void record(std::vector<Tensor> outputs, std::function<void()> backward);

  /// Reverse traversal from a scalar loss. Consumes the tape.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<Tensor> outputs;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
};

/// The calling thread's tape.
Tape& active_tape();

/// True when new operations should be recorded.
bool grad_enabled();

/// Disables recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Checked mode scans every op output for NaN/Inf and throws NumericError.
void set_checked_mode(bool enabled);
bool checked_mode();

class CheckedModeGuard {
 public:
  explicit CheckedModeGuard(bool enabled);
  ~CheckedModeGuard();
  CheckedModeGuard(const CheckedModeGuard&) = delete;
  CheckedModeGuard& operator=(const CheckedModeGuard&) = delete;

 private:
  bool previous_;
};

/// While alive, records the branch taken at every non-differentiable point
/// (relu input sign, l1 residual sign) evaluated on this thread. Comparing
/// patterns tells whether two evaluations of a program lie on the same
/// smooth piece.
class KinkRecorder {
 public:
  KinkRecorder();
  ~KinkRecorder();
  KinkRecorder(const KinkRecorder&) = delete;
  KinkRecorder& operator=(const KinkRecorder&) = delete;

  const std::vector<signed char>& pattern() const { return pattern_; }

 private:
  std::vector<signed char> pattern_;
  std::vector<signed char>* previous_;
};

/// Populates gradients of every requires_grad tensor reachable from `loss`.
void backward(const Tensor& loss);

namespace ops {

// Helpers for implementing differentiable operations outside this file.
bool should_record(std::initializer_list<const Tensor*> inputs);
/// Appends branch signs to the active KinkRecorder, if any.
void note_kinks(std::span<const float> values);
void check_finite(const Tensor& t, const char* op_name);

}  // namespace ops

// ---------------------------------------------------------------------------
// Differentiable operations. Outputs record onto the active tape whenever any
// input requires a gradient and recording is enabled.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// x[N x C] + bias[C] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

/// 3x3 cross-correlation with zero padding 1. x: [Cin x H x W],
/// weight: [Cout x Cin x 3 x 3], bias: [Cout].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& x);

/// Normalizes every row of the last axis, then applies gamma and beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

enum class Activation { kSigmoid, kRelu };
Tensor activation(const Tensor& x, Activation kind);
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::kSigmoid); }
inline Tensor relu(const Tensor& x) { return activation(x, Activation::kRelu); }

/// Mean absolute difference. Subgradient at ties is 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Concatenates [C_i x H x W] tensors along the channel axis.
Tensor concat_channels(const std::vector<Tensor>& parts);

/// Nearest-neighbour upsampling of [C x H x W] by an integer factor.
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

/// Keeps the top-left pixel of every 2x2 block of [C x H x W].
Tensor subsample2(const Tensor& x);

/// [C x H x W] -> [(H*W) x C], spatial positions become rows.
Tensor to_tokens(const Tensor& x);
/// Inverse of to_tokens.
Tensor from_tokens(const Tensor& tokens, std::size_t height, std::size_t width);

}  // namespace wfanet
