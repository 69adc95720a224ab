#include <cmath>
#include <vector>

#include "icaclf/error.hpp"
#include "icaclf/ops.hpp"

namespace icaclf::inline ICACLF_ABI {

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode) {
  if (input.rank() < 2) throw DimensionError("batch_norm: expected [batch, channels, ...]");
  const std::size_t batch = input.dim(0);
  const std::size_t channels = input.dim(1);
  const std::size_t spatial = input.size() / (batch * channels);
  const Shape cshape{channels};
  if (gamma.shape() != cshape || beta.shape() != cshape || state.running_mean.shape() != cshape ||
      state.running_var.shape() != cshape) {
    throw DimensionError("batch_norm: per-channel parameters must have shape " + to_string(cshape));
  }
  if (mode == Mode::train && batch < 2) {
    throw DegenerateBatchError("batch_norm: train mode needs a batch of at least 2");
  }
  const std::size_t count = batch * spatial;
  auto x = input.data();
  auto g = gamma.data();
  auto b = beta.data();

  auto mean = std::make_shared<std::vector<real>>(channels);
  auto inv_std = std::make_shared<std::vector<real>>(channels);
  if (mode == Mode::train) {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const real* p = x.data() + (n * channels + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) s += p[i];
      }
      const double mu = s / double(count);
      double ss = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const real* p = x.data() + (n * channels + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / double(count);
      (*mean)[c] = real(mu);
      (*inv_std)[c] = real(1.0 / std::sqrt(var + double(state.epsilon)));
      const double unbiased = ss / double(count - 1);
      rm[c] = real(state.momentum * rm[c] + (1.0 - state.momentum) * mu);
      rv[c] = real(state.momentum * rv[c] + (1.0 - state.momentum) * unbiased);
    }
  } else {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t c = 0; c < channels; ++c) {
      (*mean)[c] = rm[c];
      (*inv_std)[c] = real(1.0 / std::sqrt(double(rv[c]) + double(state.epsilon)));
    }
  }

  Tensor out(input.shape());
  auto normalized = std::make_shared<std::vector<real>>(input.size());
  auto y = out.data();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (n * channels + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        const real xh = (x[base + i] - (*mean)[c]) * (*inv_std)[c];
        (*normalized)[base + i] = xh;
        y[base + i] = g[c] * xh + b[c];
      }
    }

  if (needs_grad({&input, &gamma, &beta})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto gs = gamma.data();
      const auto& xh = *normalized;
      std::vector<double> sum_dy(channels, 0.0), sum_dy_xh(channels, 0.0);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t base = (n * channels + c) * spatial;
          for (std::size_t i = 0; i < spatial; ++i) {
            sum_dy[c] += dy[base + i];
            sum_dy_xh[c] += double(dy[base + i]) * xh[base + i];
          }
        }
      if (gamma.requires_grad()) {
        auto dg = gamma.grad();
        for (std::size_t c = 0; c < channels; ++c) dg[c] += real(sum_dy_xh[c]);
      }
      if (beta.requires_grad()) {
        auto db = beta.grad();
        for (std::size_t c = 0; c < channels; ++c) db[c] += real(sum_dy[c]);
      }
      if (!input.requires_grad()) return;
      auto dx = input.grad();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t base = (n * channels + c) * spatial;
          const real scale = gs[c] * (*inv_std)[c];
          if (mode == Mode::train) {
            const real mean_dy = real(sum_dy[c] / double(count));
            const real mean_dy_xh = real(sum_dy_xh[c] / double(count));
            for (std::size_t i = 0; i < spatial; ++i) {
              dx[base + i] += scale * (dy[base + i] - mean_dy - xh[base + i] * mean_dy_xh);
            }
          } else {
            for (std::size_t i = 0; i < spatial; ++i) dx[base + i] += scale * dy[base + i];
          }
        }
    });
  }
  return out;
}

}  // namespace icaclf
