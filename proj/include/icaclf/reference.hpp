#pragma once

#include "icaclf/config.hpp"

#include <cstdint>

#include "icaclf/kernels.hpp"

// Straight-line serial implementations of the compute kernels. They favour
// obviousness over speed and exist as test oracles and benchmark baselines.

namespace icaclf::inline ICACLF_ABI::reference {

using kernels::ConvGeometry;
using kernels::PoolGeometry;

void conv_forward(const ConvGeometry& g, const real* input, const real* weight,
                  const real* bias, real* output);
void conv_backward(const ConvGeometry& g, const real* input, const real* weight,
                   const real* grad_output, real* grad_input, real* grad_weight,
                   real* grad_bias);

void max_pool_forward(const PoolGeometry& g, const real* input, real* output,
                      std::uint32_t* argmax);

void dense_forward(std::size_t batch, std::size_t n_in, std::size_t n_out,
                   const real* input, const real* weight, const real* bias,
                   real* output);

}  // namespace icaclf::reference
