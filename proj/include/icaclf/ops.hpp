#pragma once

#include "icaclf/config.hpp"

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "icaclf/tensor.hpp"

namespace icaclf::inline ICACLF_ABI {

enum class Mode { train, eval };

/// Convolution geometry. Rank-1 convolutions run on the 3-D kernels with
/// leading extents of one; only "valid" padding exists.
struct ConvSpec {
  int rank = 3;
  std::vector<std::size_t> kernel;  // one extent per spatial axis
  std::vector<std::size_t> stride;  // empty means 1 everywhere
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  std::size_t stride_at(std::size_t axis) const {
    return stride.empty() ? 1 : stride[axis];
  }
  std::size_t kernel_volume() const;
  // floor((input - kernel) / stride) + 1 per axis; throws DimensionError.
  std::vector<std::size_t> output_extents(std::span<const std::size_t> input) const;
};

/// input [batch, in_ch, spatial...], weight [out_ch, in_ch, kernel...],
/// bias [out_ch] (may be undefined).
Tensor conv(const Tensor& input, const Tensor& weight, const Tensor& bias,
            const ConvSpec& spec);

/// Max pooling over the trailing spatial axes (one window entry per axis).
Tensor max_pool(const Tensor& input, std::span<const std::size_t> window,
                std::span<const std::size_t> stride);

/// input [batch, n_in], weight [n_out, n_in], bias [n_out].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  real momentum = real(0.9);
  real epsilon = real(1e-5);
};

/// Per-channel normalization over the batch and spatial axes. Train mode
/// updates the running statistics as running = momentum * running +
/// (1 - momentum) * batch (unbiased variance).
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode);

/// Inverted dropout; eval mode and rate 0 are the identity.
Tensor dropout(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng);

/// LSTM over input [batch, time, features] with gate order (input, forget,
/// cell, output): w_ih [4H, F], w_hh [4H, H], bias [4H]. Zero initial state;
/// returns the final hidden state [batch, H].
Tensor lstm(const Tensor& input, const Tensor& w_ih, const Tensor& w_hh,
            const Tensor& bias);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
Tensor tanh(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& input, real factor);
Tensor sum(const Tensor& input);

/// Collapses every non-batch axis.
Tensor flatten(const Tensor& input);
/// Joins [batch, n_i] tensors along the feature axis.
Tensor concat(std::span<const Tensor> inputs);
/// Inverse of concat for the given feature widths.
std::vector<Tensor> split(const Tensor& input, std::span<const std::size_t> widths);

/// Removes `crop[axis]` elements from both ends of each spatial axis.
Tensor center_crop(const Tensor& input, std::span<const std::size_t> crop);

/// [batch, 1, length] -> [batch, length / frame, frame]; the remainder of
/// length / frame is dropped from the end.
Tensor frame_sequence(const Tensor& input, std::size_t frame);

inline constexpr real kBceEpsilon = real(1e-7);

/// Mean binary cross-entropy; probabilities are clamped to [eps, 1 - eps].
Tensor bce_loss(const Tensor& probability, const Tensor& label);
/// Mean binary cross-entropy of sigmoid(logit); never saturates, the
/// gradient is (sigmoid(logit) - label) / n.
Tensor bce_with_logits(const Tensor& logit, const Tensor& label);

}  // namespace icaclf
