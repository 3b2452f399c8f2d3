#pragma once

// Dense kernel for per-position sequence tensors: same-padded 1D convolution,
// ReLU, inverted dropout, position-shared affine maps, row softmax and
// cross-entropy, each with its analytic backward pass, plus Adam.
//
// A sequence tensor is an (n positions x d channels) row-major Eigen matrix.
// Everything is templated on the scalar so the same code runs in float for
// training and in double for finite-difference checks.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "decnn/errors.hpp"
#include "decnn/random.hpp"

namespace decnn {

using Index = Eigen::Index;

template <typename Scalar>
using SeqTensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

namespace detail {

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Scalar>
void glorot_fill(Scalar* data, Index size, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Index i = 0; i < size; ++i) {
    data[i] = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * limit);
  }
}

}  // namespace detail

/// Filters of one convolution layer. `weights` is laid out as
/// (out_channels x kernel*in_channels); column `j*in_channels + ch` holds the
/// tap at offset `j - c` for input channel `ch`, so a whole layer is one GEMM
/// against the unfolded input windows.
template <typename Scalar>
struct ConvLayerParams {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 1;

  SeqTensor<Scalar> weights;
  RowVector<Scalar> bias;
  SeqTensor<Scalar> weight_grad;
  RowVector<Scalar> bias_grad;

  ConvLayerParams() = default;

  ConvLayerParams(Index in, Index out, Index k) : in_channels(in), out_channels(out), kernel(k) {
    if (k < 1 || k % 2 == 0) {
      throw ParameterError("kernel width must be odd and positive, got " + std::to_string(k));
    }
    if (in < 1 || out < 1) {
      throw ParameterError("convolution needs at least one input and one output channel");
    }
    weights = SeqTensor<Scalar>::Zero(out, k * in);
    bias = RowVector<Scalar>::Zero(out);
    weight_grad = SeqTensor<Scalar>::Zero(out, k * in);
    bias_grad = RowVector<Scalar>::Zero(out);
  }

  /// Context words on each side (c in k = 2c+1).
  Index half_window() const { return kernel / 2; }

  /// Tap of filter `filter` at relative position `offset` in [-c, c].
  Scalar& weight(Index filter, Index offset, Index channel) {
    return weights(filter, (offset + half_window()) * in_channels + channel);
  }
  Scalar weight(Index filter, Index offset, Index channel) const {
    return weights(filter, (offset + half_window()) * in_channels + channel);
  }

  void zero_grad() {
    weight_grad.setZero();
    bias_grad.setZero();
  }

  /// Glorot-uniform weights over fan_in = k*in, fan_out = k*out; zero bias.
  void init_glorot(Rng& rng) {
    detail::glorot_fill(weights.data(), weights.size(), double(kernel * in_channels),
                        double(kernel * out_channels), rng);
    bias.setZero();
  }

  template <typename Other>
  ConvLayerParams<Other> cast() const {
    ConvLayerParams<Other> out(in_channels, out_channels, kernel);
    out.weights = weights.template cast<Other>();
    out.bias = bias.template cast<Other>();
    return out;
  }
};

/// Affine map applied identically at every position: y = x W + b with W of
/// shape (in_channels x out_channels).
template <typename Scalar>
struct LinearParams {
  SeqTensor<Scalar> weights;
  RowVector<Scalar> bias;
  SeqTensor<Scalar> weight_grad;
  RowVector<Scalar> bias_grad;

  LinearParams() = default;

  LinearParams(Index in, Index out) {
    if (in < 1 || out < 1) throw ParameterError("linear layer needs positive sizes");
    weights = SeqTensor<Scalar>::Zero(in, out);
    bias = RowVector<Scalar>::Zero(out);
    weight_grad = SeqTensor<Scalar>::Zero(in, out);
    bias_grad = RowVector<Scalar>::Zero(out);
  }

  Index in_channels() const { return weights.rows(); }
  Index out_channels() const { return weights.cols(); }

  void zero_grad() {
    weight_grad.setZero();
    bias_grad.setZero();
  }

  void init_glorot(Rng& rng) {
    detail::glorot_fill(weights.data(), weights.size(), double(weights.rows()),
                        double(weights.cols()), rng);
    bias.setZero();
  }

  template <typename Other>
  LinearParams<Other> cast() const {
    LinearParams<Other> out(in_channels(), out_channels());
    out.weights = weights.template cast<Other>();
    out.bias = bias.template cast<Other>();
    return out;
  }
};

// ---------------------------------------------------------------------------
// Convolution

/// Unfolds `input` into (n x kernel*d) windows; row i holds positions
/// i-c .. i+c back to back, with out-of-range positions as zero vectors.
template <typename Derived>
SeqTensor<typename Derived::Scalar> unfold_windows(const Eigen::MatrixBase<Derived>& input,
                                                   Index kernel) {
  using Scalar = typename Derived::Scalar;
  const Index n = input.rows();
  const Index d = input.cols();
  const Index c = kernel / 2;
  SeqTensor<Scalar> windows = SeqTensor<Scalar>::Zero(n, kernel * d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < kernel; ++j) {
      const Index src = i + j - c;
      if (src < 0 || src >= n) continue;
      windows.row(i).segment(j * d, d) = input.row(src);
    }
  }
  return windows;
}

/// Pre-activation of a same-padded, stride-1 convolution:
/// out[i][r] = sum_{j=-c..c} w[j][r] . in[i+j] + b[r].
template <typename Derived>
SeqTensor<typename Derived::Scalar> conv1d_same(
    const Eigen::MatrixBase<Derived>& input, const ConvLayerParams<typename Derived::Scalar>& params) {
  using Scalar = typename Derived::Scalar;
  if (input.cols() != params.in_channels) {
    throw DimensionError("conv1d_same: input has " + std::to_string(input.cols()) +
                         " channels, layer expects " + std::to_string(params.in_channels));
  }
  SeqTensor<Scalar> out = unfold_windows(input, params.kernel) * params.weights.transpose();
  out.rowwise() += params.bias;
  return out;
}

/// Accumulates dL/dW, dL/db into `params` and returns dL/dinput.
template <typename Scalar>
SeqTensor<Scalar> conv1d_same_backward(const SeqTensor<Scalar>& input,
                                       ConvLayerParams<Scalar>& params,
                                       const SeqTensor<Scalar>& grad_out) {
  if (input.cols() != params.in_channels || grad_out.cols() != params.out_channels ||
      grad_out.rows() != input.rows()) {
    throw DimensionError("conv1d_same_backward: shape mismatch");
  }
  const Index n = input.rows();
  const Index d = input.cols();
  const Index c = params.half_window();
  const SeqTensor<Scalar> windows = unfold_windows(input, params.kernel);
  params.weight_grad.noalias() += grad_out.transpose() * windows;
  params.bias_grad += grad_out.colwise().sum();

  const SeqTensor<Scalar> grad_windows = grad_out * params.weights;
  SeqTensor<Scalar> grad_in = SeqTensor<Scalar>::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < params.kernel; ++j) {
      const Index dst = i + j - c;
      if (dst < 0 || dst >= n) continue;
      grad_in.row(dst) += grad_windows.row(i).segment(j * d, d);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Activations and regularization

template <typename Derived>
SeqTensor<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& input) {
  using Scalar = typename Derived::Scalar;
  return input.cwiseMax(Scalar(0));
}

/// Gradient through ReLU given the pre-activation it was applied to.
template <typename Scalar>
SeqTensor<Scalar> relu_backward(const SeqTensor<Scalar>& pre_activation,
                                const SeqTensor<Scalar>& grad_out) {
  return (pre_activation.array() > Scalar(0)).select(grad_out, Scalar(0));
}

template <typename Scalar>
struct DropoutResult {
  SeqTensor<Scalar> output;
  /// Per-element multiplier (0 or 1/(1-rate)); empty when dropout was a no-op.
  SeqTensor<Scalar> mask;
};

/// Inverted dropout. Identity when `training` is false or `rate` is zero.
template <typename Derived>
DropoutResult<typename Derived::Scalar> dropout(const Eigen::MatrixBase<Derived>& input, double rate,
                                                Rng& rng, bool training) {
  using Scalar = typename Derived::Scalar;
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult<Scalar> result;
  if (!training || rate == 0.0) {
    result.output = input;
    return result;
  }
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  result.mask.resize(input.rows(), input.cols());
  Scalar* m = result.mask.data();
  for (Index i = 0; i < result.mask.size(); ++i) {
    m[i] = uniform01(rng) < rate ? Scalar(0) : keep_scale;
  }
  result.output = input.cwiseProduct(result.mask);
  return result;
}

template <typename Scalar>
SeqTensor<Scalar> dropout_backward(const SeqTensor<Scalar>& mask, const SeqTensor<Scalar>& grad_out) {
  if (mask.size() == 0) return grad_out;
  return grad_out.cwiseProduct(mask);
}

// ---------------------------------------------------------------------------
// Position-shared affine map

template <typename Derived>
SeqTensor<typename Derived::Scalar> linear_positionwise(
    const Eigen::MatrixBase<Derived>& input, const LinearParams<typename Derived::Scalar>& params) {
  using Scalar = typename Derived::Scalar;
  if (input.cols() != params.in_channels()) {
    throw DimensionError("linear_positionwise: input has " + std::to_string(input.cols()) +
                         " channels, layer expects " + std::to_string(params.in_channels()));
  }
  SeqTensor<Scalar> out = input * params.weights;
  out.rowwise() += params.bias;
  return out;
}

template <typename Scalar>
SeqTensor<Scalar> linear_positionwise_backward(const SeqTensor<Scalar>& input,
                                               LinearParams<Scalar>& params,
                                               const SeqTensor<Scalar>& grad_out) {
  if (input.cols() != params.in_channels() || grad_out.cols() != params.out_channels() ||
      grad_out.rows() != input.rows()) {
    throw DimensionError("linear_positionwise_backward: shape mismatch");
  }
  params.weight_grad.noalias() += input.transpose() * grad_out;
  params.bias_grad += grad_out.colwise().sum();
  return grad_out * params.weights.transpose();
}

// ---------------------------------------------------------------------------
// Output distribution and loss

template <typename Derived>
SeqTensor<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  SeqTensor<Scalar> out = logits;
  for (Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return out;
}

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  /// d(loss)/d(logits) for logits that produced `probs` through softmax_rows.
  SeqTensor<Scalar> grad_logits;
};

/// Mean over positions of -log p(gold); gradient (probs - onehot) / n.
template <typename Scalar>
LossResult<Scalar> cross_entropy_loss(const SeqTensor<Scalar>& probs, std::span<const int> labels) {
  const Index n = probs.rows();
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " positions");
  }
  if (n == 0) throw DimensionError("cross_entropy_loss: empty sequence");
  LossResult<Scalar> result;
  result.grad_logits = probs;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.cols()) {
      throw DataError("cross_entropy_loss: label " + std::to_string(y) + " at position " +
                      std::to_string(i) + " is out of range");
    }
    // Clamp keeps log finite when a gold probability underflows to zero.
    const double p = std::max<double>(probs(i, y), 1e-30);
    total -= std::log(p);
    result.grad_logits(i, y) -= Scalar(1);
  }
  result.grad_logits /= Scalar(n);
  result.loss = Scalar(total / double(n));
  return result;
}

// ---------------------------------------------------------------------------
// Adam

/// A parameter tensor and its gradient viewed as flat spans.
template <typename Scalar>
struct ParamSlot {
  std::span<Scalar> value;
  std::span<const Scalar> grad;
};

template <typename ValueDerived, typename GradDerived>
ParamSlot<typename ValueDerived::Scalar> param_slot(Eigen::PlainObjectBase<ValueDerived>& value,
                                                    const Eigen::PlainObjectBase<GradDerived>& grad) {
  if (value.rows() != grad.rows() || value.cols() != grad.cols()) {
    throw DimensionError("parameter " + detail::shape_str(value.rows(), value.cols()) +
                         " has gradient " + detail::shape_str(grad.rows(), grad.cols()));
  }
  return {std::span(value.data(), static_cast<std::size_t>(value.size())),
          std::span(grad.data(), static_cast<std::size_t>(grad.size()))};
}

template <typename Scalar>
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<Scalar>> first_moment;
  std::vector<std::vector<Scalar>> second_moment;
};

/// One bias-corrected Adam update over all slots. Moments are created
/// (zeroed) on the first call and must keep their shapes afterwards.
template <typename Scalar>
void adam_step(std::span<const ParamSlot<Scalar>> slots, AdamState<Scalar>& state) {
  if (state.first_moment.empty() && state.step == 0) {
    for (const auto& slot : slots) {
      state.first_moment.emplace_back(slot.value.size(), Scalar(0));
      state.second_moment.emplace_back(slot.value.size(), Scalar(0));
    }
  }
  if (state.first_moment.size() != slots.size()) {
    throw DimensionError("adam_step: optimizer tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, got " + std::to_string(slots.size()));
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].value.size() != slots[s].grad.size() ||
        slots[s].value.size() != state.first_moment[s].size()) {
      throw DimensionError("adam_step: size mismatch in tensor " + std::to_string(s));
    }
  }

  ++state.step;
  const double t = double(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const Scalar b1 = Scalar(state.beta1);
  const Scalar b2 = Scalar(state.beta2);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& m = state.first_moment[s];
    auto& v = state.second_moment[s];
    const auto& slot = slots[s];
    for (std::size_t i = 0; i < slot.value.size(); ++i) {
      const Scalar g = slot.grad[i];
      m[i] = b1 * m[i] + (Scalar(1) - b1) * g;
      v[i] = b2 * v[i] + (Scalar(1) - b2) * g * g;
      const double m_hat = double(m[i]) / correction1;
      const double v_hat = double(v[i]) / correction2;
      slot.value[i] -= Scalar(state.lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  }
}

}  // namespace decnn
