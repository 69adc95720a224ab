// Parallel kernels against the serial reference on shapes from the
// canonical models.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "icaclf/kernels.hpp"
#include "icaclf/reference.hpp"

using namespace icaclf;

namespace {

std::vector<real> random_values(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<real> v(n);
  for (auto& x : v) x = real(u(rng));
  return v;
}

// First spatial block at 24x27x24, second at the pooled size, and the first
// temporal block at T = 1200.
kernels::ConvGeometry conv_case(int which) {
  kernels::ConvGeometry g;
  g.batch = 16;
  switch (which) {
    case 0:
      g.in_channels = 1;
      g.out_channels = 8;
      g.input = {24, 27, 24};
      g.kernel = {3, 3, 3};
      break;
    case 1:
      g.in_channels = 8;
      g.out_channels = 16;
      g.input = {11, 12, 11};
      g.kernel = {3, 3, 3};
      break;
    default:
      g.batch = 128;
      g.in_channels = 1;
      g.out_channels = 16;
      g.input = {1, 1, 1200};
      g.kernel = {1, 1, 5};
      break;
  }
  for (int a = 0; a < 3; ++a) g.output[a] = (g.input[a] - g.kernel[a]) / g.stride[a] + 1;
  return g;
}

struct ConvBuffers {
  kernels::ConvGeometry g;
  std::vector<real> x, w, b, y, dy, dx, dw, db;
  explicit ConvBuffers(int which)
      : g(conv_case(which)),
        x(random_values(g.batch * g.in_channels * g.input_volume())),
        w(random_values(g.weight_size())),
        b(random_values(g.out_channels)),
        y(g.batch * g.out_channels * g.output_volume()),
        dy(random_values(y.size())),
        dx(x.size()),
        dw(w.size()),
        db(b.size()) {}
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  ConvBuffers c(int(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv_forward(c.g, c.x.data(), c.w.data(), c.b.data(), c.y.data());
    } else {
      reference::conv_forward(c.g, c.x.data(), c.w.data(), c.b.data(), c.y.data());
    }
    benchmark::DoNotOptimize(c.y.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(c.y.size() * c.g.patch_size()));
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  ConvBuffers c(int(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv_backward(c.g, c.x.data(), c.w.data(), c.dy.data(), c.dx.data(), c.dw.data(), c.db.data());
    } else {
      reference::conv_backward(c.g, c.x.data(), c.w.data(), c.dy.data(), c.dx.data(), c.dw.data(), c.db.data());
    }
    benchmark::DoNotOptimize(c.dw.data());
  }
}

template <bool Parallel>
void BM_MaxPool(benchmark::State& state) {
  kernels::PoolGeometry g;
  g.planes = 16 * 8;
  g.input = {22, 25, 22};
  g.window = g.stride = {2, 2, 2};
  for (int a = 0; a < 3; ++a) g.output[a] = (g.input[a] - g.window[a]) / g.stride[a] + 1;
  const auto x = random_values(g.planes * g.input_volume());
  std::vector<real> y(g.planes * g.output_volume());
  std::vector<std::uint32_t> arg(y.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::max_pool_forward(g, x.data(), y.data(), arg.data());
    } else {
      reference::max_pool_forward(g, x.data(), y.data(), arg.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Dense(benchmark::State& state) {
  const std::size_t batch = 128, n_in = std::size_t(state.range(0)), n_out = 128;
  const auto x = random_values(batch * n_in), w = random_values(n_in * n_out), b = random_values(n_out);
  std::vector<real> y(batch * n_out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_forward(batch, n_in, n_out, x.data(), w.data(), b.data(), y.data());
    } else {
      reference::dense_forward(batch, n_in, n_out, x.data(), w.data(), b.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/kernels")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/kernels")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<true>)->Name("max_pool/kernels")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<false>)->Name("max_pool/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dense<true>)->Name("dense/kernels")->Arg(512)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Dense<false>)->Name("dense/reference")->Arg(512)->Arg(4096)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
