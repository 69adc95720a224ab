#include <algorithm>
#include <cmath>
#include <vector>

#include "icaclf/kernels.hpp"

namespace icaclf::inline ICACLF_ABI::kernels {

namespace {

inline real logistic(real x) { return real(1) / (real(1) + std::exp(-x)); }

}  // namespace

void lstm_forward(const LstmGeometry& g, const real* input, const real* w_ih,
                  const real* w_hh, const real* bias, real* final_hidden,
                  LstmTrace& trace) {
  const std::size_t H = g.hidden;
  const std::size_t F = g.features;
  const std::size_t G = 4 * H;
  trace.gates.assign(g.batch * g.time * G, real(0));
  trace.cell.assign(g.batch * g.time * H, real(0));
  trace.hidden.assign(g.batch * g.time * H, real(0));
  const auto batch = static_cast<std::ptrdiff_t>(g.batch);

#pragma omp parallel
  {
    std::vector<real> z(G);
    std::vector<real> zero_state(H, real(0));
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < batch; ++n) {
      const real* h_prev = zero_state.data();
      const real* c_prev = zero_state.data();
      for (std::size_t t = 0; t < g.time; ++t) {
        const std::size_t step = static_cast<std::size_t>(n) * g.time + t;
        const real* x = input + step * F;
        for (std::size_t r = 0; r < G; ++r) {
          const real* wi = w_ih + r * F;
          const real* wh = w_hh + r * H;
          real acc = bias[r];
#pragma omp simd reduction(+ : acc)
          for (std::size_t f = 0; f < F; ++f) acc += wi[f] * x[f];
          real acc_h = 0;
#pragma omp simd reduction(+ : acc_h)
          for (std::size_t j = 0; j < H; ++j) acc_h += wh[j] * h_prev[j];
          z[r] = acc + acc_h;
        }
        real* gates = trace.gates.data() + step * G;
        real* cell = trace.cell.data() + step * H;
        real* hidden = trace.hidden.data() + step * H;
        for (std::size_t j = 0; j < H; ++j) {
          const real i = logistic(z[j]);
          const real f = logistic(z[H + j]);
          const real c_hat = std::tanh(z[2 * H + j]);
          const real o = logistic(z[3 * H + j]);
          gates[j] = i;
          gates[H + j] = f;
          gates[2 * H + j] = c_hat;
          gates[3 * H + j] = o;
          cell[j] = f * c_prev[j] + i * c_hat;
          hidden[j] = o * std::tanh(cell[j]);
        }
        h_prev = hidden;
        c_prev = cell;
      }
      for (std::size_t j = 0; j < H; ++j) final_hidden[n * H + j] = h_prev[j];
    }
  }
}

void lstm_backward(const LstmGeometry& g, const real* input, const real* w_ih,
                   const real* w_hh, const LstmTrace& trace,
                   const real* grad_final_hidden, real* grad_input,
                   real* grad_w_ih, real* grad_w_hh, real* grad_bias) {
  const std::size_t H = g.hidden;
  const std::size_t F = g.features;
  const std::size_t G = 4 * H;
  const std::size_t per_sample = G * F + G * H + G;
  const bool want_weight = grad_w_ih || grad_w_hh || grad_bias;
  std::vector<real> partial(want_weight ? g.batch * per_sample : 0, real(0));
  const auto batch = static_cast<std::ptrdiff_t>(g.batch);

#pragma omp parallel
  {
    std::vector<real> dz(G), dh(H), dc(H), dh_prev(H);
    std::vector<real> zero_state(H, real(0));
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < batch; ++n) {
      real* dwi = want_weight ? partial.data() + n * per_sample : nullptr;
      real* dwh = want_weight ? dwi + G * F : nullptr;
      real* db = want_weight ? dwh + G * H : nullptr;
      for (std::size_t j = 0; j < H; ++j) {
        dh[j] = grad_final_hidden[n * H + j];
        dc[j] = 0;
      }
      for (std::size_t t = g.time; t-- > 0;) {
        const std::size_t step = static_cast<std::size_t>(n) * g.time + t;
        const real* gates = trace.gates.data() + step * G;
        const real* cell = trace.cell.data() + step * H;
        const real* c_prev = t ? trace.cell.data() + (step - 1) * H : zero_state.data();
        const real* h_prev = t ? trace.hidden.data() + (step - 1) * H : zero_state.data();
        for (std::size_t j = 0; j < H; ++j) {
          const real i = gates[j];
          const real f = gates[H + j];
          const real c_hat = gates[2 * H + j];
          const real o = gates[3 * H + j];
          const real tc = std::tanh(cell[j]);
          const real d_o = dh[j] * tc;
          const real d_c = dc[j] + dh[j] * o * (real(1) - tc * tc);
          dz[j] = d_c * c_hat * i * (real(1) - i);
          dz[H + j] = d_c * c_prev[j] * f * (real(1) - f);
          dz[2 * H + j] = d_c * i * (real(1) - c_hat * c_hat);
          dz[3 * H + j] = d_o * o * (real(1) - o);
          dc[j] = d_c * f;
        }
        std::fill(dh_prev.begin(), dh_prev.end(), real(0));
        const real* x = input + step * F;
        real* dx = grad_input ? grad_input + step * F : nullptr;
        for (std::size_t r = 0; r < G; ++r) {
          const real d = dz[r];
          const real* wh = w_hh + r * H;
#pragma omp simd
          for (std::size_t j = 0; j < H; ++j) dh_prev[j] += d * wh[j];
          if (dx) {
            const real* wi = w_ih + r * F;
            for (std::size_t f = 0; f < F; ++f) dx[f] += d * wi[f];
          }
          if (want_weight) {
            real* gi = dwi + r * F;
            for (std::size_t f = 0; f < F; ++f) gi[f] += d * x[f];
            real* gh = dwh + r * H;
#pragma omp simd
            for (std::size_t j = 0; j < H; ++j) gh[j] += d * h_prev[j];
            db[r] += d;
          }
        }
        dh.swap(dh_prev);
      }
    }
  }

  if (want_weight) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      const real* dwi = partial.data() + n * per_sample;
      const real* dwh = dwi + G * F;
      const real* db = dwh + G * H;
      if (grad_w_ih) for (std::size_t i = 0; i < G * F; ++i) grad_w_ih[i] += dwi[i];
      if (grad_w_hh) for (std::size_t i = 0; i < G * H; ++i) grad_w_hh[i] += dwh[i];
      if (grad_bias) for (std::size_t i = 0; i < G; ++i) grad_bias[i] += db[i];
    }
  }
}

}  // namespace icaclf::kernels
