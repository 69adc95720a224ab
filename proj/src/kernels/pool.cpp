#include <limits>

#include "icaclf/kernels.hpp"

namespace icaclf::inline ICACLF_ABI::kernels {

void max_pool_forward(const PoolGeometry& g, const real* input, real* output,
                      std::uint32_t* argmax) {
  const std::size_t in_volume = g.input_volume();
  const std::size_t out_volume = g.output_volume();
  const auto planes = static_cast<std::ptrdiff_t>(g.planes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t plane = 0; plane < planes; ++plane) {
    const real* in = input + plane * in_volume;
    real* out = output + plane * out_volume;
    std::uint32_t* arg = argmax + plane * out_volume;
    std::size_t o = 0;
    for (std::size_t z = 0; z < g.output[0]; ++z) {
      for (std::size_t y = 0; y < g.output[1]; ++y) {
        for (std::size_t x = 0; x < g.output[2]; ++x, ++o) {
          real best = -std::numeric_limits<real>::infinity();
          std::size_t best_index = 0;
          for (std::size_t a = 0; a < g.window[0]; ++a) {
            const std::size_t iz = z * g.stride[0] + a;
            for (std::size_t b = 0; b < g.window[1]; ++b) {
              const std::size_t iy = y * g.stride[1] + b;
              const std::size_t row = (iz * g.input[1] + iy) * g.input[2];
              for (std::size_t e = 0; e < g.window[2]; ++e) {
                const std::size_t index = row + x * g.stride[2] + e;
                if (in[index] > best) {
                  best = in[index];
                  best_index = index;
                }
              }
            }
          }
          out[o] = best;
          arg[o] = static_cast<std::uint32_t>(best_index);
        }
      }
    }
  }
}

void max_pool_backward(const PoolGeometry& g, const real* grad_output,
                       const std::uint32_t* argmax, real* grad_input) {
  const std::size_t in_volume = g.input_volume();
  const std::size_t out_volume = g.output_volume();
  const auto planes = static_cast<std::ptrdiff_t>(g.planes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t plane = 0; plane < planes; ++plane) {
    const real* dout = grad_output + plane * out_volume;
    const std::uint32_t* arg = argmax + plane * out_volume;
    real* din = grad_input + plane * in_volume;
    for (std::size_t o = 0; o < out_volume; ++o) din[arg[o]] += dout[o];
  }
}

}  // namespace icaclf::kernels
