#include <algorithm>
#include <cstring>
#include <vector>

#include "icaclf/kernels.hpp"

namespace icaclf::inline ICACLF_ABI::kernels {

namespace {

// Output columns processed per block so the patch block stays cache resident.
constexpr std::size_t kColumnBlock = 512;

// Unfolds one sample into cols[patch_row][output_position].
void unfold(const ConvGeometry& g, const real* input, real* cols) {
  const auto [od, oh, ow] = g.output;
  const auto [id, ih, iw] = g.input;
  const auto [sd, sh, sw] = g.stride;
  const std::size_t out_volume = g.output_volume();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const real* plane = input + c * g.input_volume();
    for (std::size_t a = 0; a < g.kernel[0]; ++a) {
      for (std::size_t b = 0; b < g.kernel[1]; ++b) {
        for (std::size_t e = 0; e < g.kernel[2]; ++e, ++row) {
          real* dst = cols + row * out_volume;
          for (std::size_t z = 0; z < od; ++z) {
            for (std::size_t y = 0; y < oh; ++y) {
              const real* src = plane + ((z * sd + a) * ih + (y * sh + b)) * iw + e;
              real* out = dst + (z * oh + y) * ow;
              if (sw == 1) {
                std::memcpy(out, src, ow * sizeof(real));
              } else {
                for (std::size_t x = 0; x < ow; ++x) out[x] = src[x * sw];
              }
            }
          }
        }
      }
    }
  }
  (void)id;
}

// Adds cols back into the input layout (adjoint of unfold).
void fold_add(const ConvGeometry& g, const real* cols, real* grad_input) {
  const auto [od, oh, ow] = g.output;
  const auto [id, ih, iw] = g.input;
  const auto [sd, sh, sw] = g.stride;
  const std::size_t out_volume = g.output_volume();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    real* plane = grad_input + c * g.input_volume();
    for (std::size_t a = 0; a < g.kernel[0]; ++a) {
      for (std::size_t b = 0; b < g.kernel[1]; ++b) {
        for (std::size_t e = 0; e < g.kernel[2]; ++e, ++row) {
          const real* src_row = cols + row * out_volume;
          for (std::size_t z = 0; z < od; ++z) {
            for (std::size_t y = 0; y < oh; ++y) {
              real* dst = plane + ((z * sd + a) * ih + (y * sh + b)) * iw + e;
              const real* src = src_row + (z * oh + y) * ow;
              if (sw == 1) {
#pragma omp simd
                for (std::size_t x = 0; x < ow; ++x) dst[x] += src[x];
              } else {
                for (std::size_t x = 0; x < ow; ++x) dst[x * sw] += src[x];
              }
            }
          }
        }
      }
    }
  }
  (void)id;
}

}  // namespace

void conv_forward(const ConvGeometry& g, const real* input, const real* weight,
                  const real* bias, real* output) {
  const std::size_t patch = g.patch_size();
  const std::size_t positions = g.output_volume();
  const std::size_t in_stride = g.in_channels * g.input_volume();
  const std::size_t out_stride = g.out_channels * positions;
  const auto batch = static_cast<std::ptrdiff_t>(g.batch);

#pragma omp parallel
  {
    std::vector<real> cols(patch * positions);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < batch; ++n) {
      unfold(g, input + n * in_stride, cols.data());
      real* out = output + n * out_stride;
      for (std::size_t p0 = 0; p0 < positions; p0 += kColumnBlock) {
        const std::size_t len = std::min(kColumnBlock, positions - p0);
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
          real* dst = out + oc * positions + p0;
          const real b = bias ? bias[oc] : real(0);
          std::fill(dst, dst + len, b);
          const real* w = weight + oc * patch;
          for (std::size_t k = 0; k < patch; ++k) {
            const real wk = w[k];
            const real* src = cols.data() + k * positions + p0;
#pragma omp simd
            for (std::size_t p = 0; p < len; ++p) dst[p] += wk * src[p];
          }
        }
      }
    }
  }
}

void conv_backward(const ConvGeometry& g, const real* input, const real* weight,
                   const real* grad_output, real* grad_input, real* grad_weight,
                   real* grad_bias) {
  const std::size_t patch = g.patch_size();
  const std::size_t positions = g.output_volume();
  const std::size_t in_stride = g.in_channels * g.input_volume();
  const std::size_t out_stride = g.out_channels * positions;
  const std::size_t wsize = g.weight_size();
  const auto batch = static_cast<std::ptrdiff_t>(g.batch);
  const bool want_weight = grad_weight != nullptr || grad_bias != nullptr;

  // Per-sample partial weight/bias gradients, summed in sample order below.
  std::vector<real> partial(want_weight ? g.batch * (wsize + g.out_channels) : 0, real(0));

#pragma omp parallel
  {
    std::vector<real> cols(want_weight ? patch * positions : 0);
    std::vector<real> grad_cols(grad_input ? patch * positions : 0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < batch; ++n) {
      const real* dout = grad_output + n * out_stride;
      if (want_weight) {
        unfold(g, input + n * in_stride, cols.data());
        real* dw = partial.data() + n * (wsize + g.out_channels);
        real* db = dw + wsize;
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
          const real* d = dout + oc * positions;
          real acc = 0;
#pragma omp simd reduction(+ : acc)
          for (std::size_t p = 0; p < positions; ++p) acc += d[p];
          db[oc] = acc;
        }
        for (std::size_t p0 = 0; p0 < positions; p0 += kColumnBlock) {
          const std::size_t len = std::min(kColumnBlock, positions - p0);
          for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
            const real* d = dout + oc * positions + p0;
            real* w = dw + oc * patch;
            for (std::size_t k = 0; k < patch; ++k) {
              const real* src = cols.data() + k * positions + p0;
              real acc = 0;
#pragma omp simd reduction(+ : acc)
              for (std::size_t p = 0; p < len; ++p) acc += d[p] * src[p];
              w[k] += acc;
            }
          }
        }
      }
      if (grad_input) {
        for (std::size_t p0 = 0; p0 < positions; p0 += kColumnBlock) {
          const std::size_t len = std::min(kColumnBlock, positions - p0);
          for (std::size_t k = 0; k < patch; ++k) {
            real* dst = grad_cols.data() + k * positions + p0;
            std::fill(dst, dst + len, real(0));
            for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
              const real wk = weight[oc * patch + k];
              const real* d = dout + oc * positions + p0;
#pragma omp simd
              for (std::size_t p = 0; p < len; ++p) dst[p] += wk * d[p];
            }
          }
        }
        fold_add(g, grad_cols.data(), grad_input + n * in_stride);
      }
    }
  }

  if (want_weight) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      const real* dw = partial.data() + n * (wsize + g.out_channels);
      if (grad_weight) {
        for (std::size_t i = 0; i < wsize; ++i) grad_weight[i] += dw[i];
      }
      if (grad_bias) {
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) grad_bias[oc] += dw[wsize + oc];
      }
    }
  }
}

}  // namespace icaclf::kernels
