#include "icaclf/reference.hpp"

#include <limits>

namespace icaclf::inline ICACLF_ABI::reference {

void conv_forward(const ConvGeometry& g, const real* input, const real* weight,
                  const real* bias, real* output) {
  const auto& in = g.input;
  const auto& k = g.kernel;
  const auto& s = g.stride;
  const auto& out = g.output;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t z = 0; z < out[0]; ++z)
        for (std::size_t y = 0; y < out[1]; ++y)
          for (std::size_t x = 0; x < out[2]; ++x) {
            double acc = bias ? bias[oc] : 0.0;
            for (std::size_t ic = 0; ic < g.in_channels; ++ic)
              for (std::size_t a = 0; a < k[0]; ++a)
                for (std::size_t b = 0; b < k[1]; ++b)
                  for (std::size_t e = 0; e < k[2]; ++e) {
                    const std::size_t src =
                        (((n * g.in_channels + ic) * in[0] + z * s[0] + a) * in[1] + y * s[1] + b) * in[2] +
                        x * s[2] + e;
                    const std::size_t w = (((oc * g.in_channels + ic) * k[0] + a) * k[1] + b) * k[2] + e;
                    acc += double(input[src]) * double(weight[w]);
                  }
            output[(((n * g.out_channels + oc) * out[0] + z) * out[1] + y) * out[2] + x] = real(acc);
          }
}

void conv_backward(const ConvGeometry& g, const real* input, const real* weight,
                   const real* grad_output, real* grad_input, real* grad_weight,
                   real* grad_bias) {
  const auto& in = g.input;
  const auto& k = g.kernel;
  const auto& s = g.stride;
  const auto& out = g.output;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t z = 0; z < out[0]; ++z)
        for (std::size_t y = 0; y < out[1]; ++y)
          for (std::size_t x = 0; x < out[2]; ++x) {
            const real d = grad_output[(((n * g.out_channels + oc) * out[0] + z) * out[1] + y) * out[2] + x];
            if (grad_bias) grad_bias[oc] += d;
            for (std::size_t ic = 0; ic < g.in_channels; ++ic)
              for (std::size_t a = 0; a < k[0]; ++a)
                for (std::size_t b = 0; b < k[1]; ++b)
                  for (std::size_t e = 0; e < k[2]; ++e) {
                    const std::size_t src =
                        (((n * g.in_channels + ic) * in[0] + z * s[0] + a) * in[1] + y * s[1] + b) * in[2] +
                        x * s[2] + e;
                    const std::size_t w = (((oc * g.in_channels + ic) * k[0] + a) * k[1] + b) * k[2] + e;
                    if (grad_weight) grad_weight[w] += d * input[src];
                    if (grad_input) grad_input[src] += d * weight[w];
                  }
          }
}

void max_pool_forward(const PoolGeometry& g, const real* input, real* output,
                      std::uint32_t* argmax) {
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < g.planes; ++plane) {
    const real* in = input + plane * g.input_volume();
    for (std::size_t z = 0; z < g.output[0]; ++z)
      for (std::size_t y = 0; y < g.output[1]; ++y)
        for (std::size_t x = 0; x < g.output[2]; ++x, ++o) {
          real best = -std::numeric_limits<real>::infinity();
          std::uint32_t best_index = 0;
          for (std::size_t a = 0; a < g.window[0]; ++a)
            for (std::size_t b = 0; b < g.window[1]; ++b)
              for (std::size_t e = 0; e < g.window[2]; ++e) {
                const std::size_t index =
                    ((z * g.stride[0] + a) * g.input[1] + y * g.stride[1] + b) * g.input[2] + x * g.stride[2] + e;
                if (in[index] > best) {
                  best = in[index];
                  best_index = static_cast<std::uint32_t>(index);
                }
              }
          output[o] = best;
          argmax[o] = best_index;
        }
  }
}

void dense_forward(std::size_t batch, std::size_t n_in, std::size_t n_out,
                   const real* input, const real* weight, const real* bias,
                   real* output) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = bias ? bias[o] : 0.0;
      for (std::size_t i = 0; i < n_in; ++i) acc += double(weight[o * n_in + i]) * double(input[n * n_in + i]);
      output[n * n_out + o] = real(acc);
    }
}

}  // namespace icaclf::reference
