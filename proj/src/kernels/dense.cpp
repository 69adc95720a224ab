#include <vector>

#include "icaclf/kernels.hpp"

namespace icaclf::inline ICACLF_ABI::kernels {

void dense_forward(std::size_t batch, std::size_t n_in, std::size_t n_out,
                   const real* input, const real* weight, const real* bias,
                   real* output) {
  const auto rows = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < rows; ++n) {
    const real* x = input + n * n_in;
    real* y = output + n * n_out;
    for (std::size_t o = 0; o < n_out; ++o) {
      const real* w = weight + o * n_in;
      real acc = 0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
      y[o] = acc + (bias ? bias[o] : real(0));
    }
  }
}

void dense_backward(std::size_t batch, std::size_t n_in, std::size_t n_out,
                    const real* input, const real* weight, const real* grad_output,
                    real* grad_input, real* grad_weight, real* grad_bias) {
  const auto rows = static_cast<std::ptrdiff_t>(batch);
  if (grad_input) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < rows; ++n) {
      const real* dy = grad_output + n * n_out;
      real* dx = grad_input + n * n_in;
      for (std::size_t o = 0; o < n_out; ++o) {
        const real d = dy[o];
        const real* w = weight + o * n_in;
#pragma omp simd
        for (std::size_t i = 0; i < n_in; ++i) dx[i] += d * w[i];
      }
    }
  }
  if (grad_weight) {
    // Rows of the weight gradient are independent; each sums over the batch
    // in order.
    const auto outs = static_cast<std::ptrdiff_t>(n_out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < outs; ++o) {
      real* dw = grad_weight + o * n_in;
      for (std::size_t n = 0; n < batch; ++n) {
        const real d = grad_output[n * n_out + o];
        const real* x = input + n * n_in;
#pragma omp simd
        for (std::size_t i = 0; i < n_in; ++i) dw[i] += d * x[i];
      }
    }
  }
  if (grad_bias) {
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < n_out; ++o) grad_bias[o] += grad_output[n * n_out + o];
    }
  }
}

}  // namespace icaclf::kernels
