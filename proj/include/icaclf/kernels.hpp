#pragma once

#include "icaclf/config.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "icaclf/tensor.hpp"

// OpenMP-parallel compute kernels behind the differentiable ops. Each kernel
// has a serial counterpart in reference.hpp that the tests and the benchmark
// compare against. Backward kernels accumulate (+=) into their outputs.
// Parallel reductions write per-sample partials and sum them in sample
// order, so results do not depend on the thread count.

namespace icaclf::inline ICACLF_ABI::kernels {

using Extent3 = std::array<std::size_t, 3>;

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Extent3 input{1, 1, 1};
  Extent3 kernel{1, 1, 1};
  Extent3 stride{1, 1, 1};
  Extent3 output{1, 1, 1};

  std::size_t input_volume() const { return input[0] * input[1] * input[2]; }
  std::size_t output_volume() const { return output[0] * output[1] * output[2]; }
  std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
  // Rows of the unfolded patch matrix: in_channels * kernel volume.
  std::size_t patch_size() const { return in_channels * kernel_volume(); }
  std::size_t weight_size() const { return out_channels * patch_size(); }
};

void conv_forward(const ConvGeometry& g, const real* input, const real* weight,
                  const real* bias, real* output);

// Any of grad_input / grad_weight / grad_bias may be null.
void conv_backward(const ConvGeometry& g, const real* input, const real* weight,
                   const real* grad_output, real* grad_input, real* grad_weight,
                   real* grad_bias);

struct PoolGeometry {
  std::size_t planes = 1;  // batch * channels
  Extent3 input{1, 1, 1};
  Extent3 window{1, 1, 1};
  Extent3 stride{1, 1, 1};
  Extent3 output{1, 1, 1};

  std::size_t input_volume() const { return input[0] * input[1] * input[2]; }
  std::size_t output_volume() const { return output[0] * output[1] * output[2]; }
};

// argmax receives the flat input index (within the plane) of each maximum;
// ties resolve to the first position in scan order.
void max_pool_forward(const PoolGeometry& g, const real* input, real* output,
                      std::uint32_t* argmax);
void max_pool_backward(const PoolGeometry& g, const real* grad_output,
                       const std::uint32_t* argmax, real* grad_input);

void dense_forward(std::size_t batch, std::size_t n_in, std::size_t n_out,
                   const real* input, const real* weight, const real* bias,
                   real* output);
void dense_backward(std::size_t batch, std::size_t n_in, std::size_t n_out,
                    const real* input, const real* weight, const real* grad_output,
                    real* grad_input, real* grad_weight, real* grad_bias);

struct LstmGeometry {
  std::size_t batch = 1;
  std::size_t time = 1;
  std::size_t features = 1;
  std::size_t hidden = 1;
};

// Saved activations per (sample, step): gates [4H] after their
// nonlinearities, cell state [H] and hidden state [H].
struct LstmTrace {
  std::vector<real> gates;
  std::vector<real> cell;
  std::vector<real> hidden;
};

void lstm_forward(const LstmGeometry& g, const real* input, const real* w_ih,
                  const real* w_hh, const real* bias, real* final_hidden,
                  LstmTrace& trace);
void lstm_backward(const LstmGeometry& g, const real* input, const real* w_ih,
                   const real* w_hh, const LstmTrace& trace,
                   const real* grad_final_hidden, real* grad_input,
                   real* grad_w_ih, real* grad_w_hh, real* grad_bias);

}  // namespace icaclf::kernels
