#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "icaclf/kernels.hpp"
#include "icaclf/ops.hpp"
#include "icaclf/reference.hpp"
#include "support/oracles.hpp"

using namespace icaclf;

namespace {

std::vector<real> random_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<real> v(n);
  for (auto& x : v) x = real(u(rng));
  return v;
}

kernels::ConvGeometry random_geometry(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  kernels::ConvGeometry g;
  g.batch = pick(1, 3);
  g.in_channels = pick(1, 3);
  g.out_channels = pick(1, 4);
  for (int a = 0; a < 3; ++a) {
    g.input[a] = pick(1, 9);
    g.kernel[a] = pick(1, g.input[a]);
    g.stride[a] = pick(1, 2);
    g.output[a] = (g.input[a] - g.kernel[a]) / g.stride[a] + 1;
  }
  return g;
}

}  // namespace

TEST(Kernels, ConvForwardMatchesReference) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = random_geometry(rng);
    const auto x = random_values(g.batch * g.in_channels * g.input_volume(), rng);
    const auto w = random_values(g.weight_size(), rng);
    const auto b = random_values(g.out_channels, rng);
    std::vector<real> fast(g.batch * g.out_channels * g.output_volume());
    std::vector<real> slow(fast.size());
    kernels::conv_forward(g, x.data(), w.data(), b.data(), fast.data());
    reference::conv_forward(g, x.data(), w.data(), b.data(), slow.data());
    for (std::size_t i = 0; i < fast.size(); ++i) ASSERT_NEAR(fast[i], slow[i], 1e-5 * (1 + std::abs(slow[i]))) << "trial " << trial;
  }
}

TEST(Kernels, ConvBackwardMatchesReference) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = random_geometry(rng);
    const auto x = random_values(g.batch * g.in_channels * g.input_volume(), rng);
    const auto w = random_values(g.weight_size(), rng);
    const auto dy = random_values(g.batch * g.out_channels * g.output_volume(), rng);
    std::vector<real> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size()), db1(g.out_channels),
        db2(g.out_channels);
    kernels::conv_backward(g, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
    reference::conv_backward(g, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
    for (std::size_t i = 0; i < dx1.size(); ++i) ASSERT_NEAR(dx1[i], dx2[i], 1e-4 * (1 + std::abs(dx2[i])));
    for (std::size_t i = 0; i < dw1.size(); ++i) ASSERT_NEAR(dw1[i], dw2[i], 1e-4 * (1 + std::abs(dw2[i])));
    for (std::size_t i = 0; i < db1.size(); ++i) ASSERT_NEAR(db1[i], db2[i], 1e-4 * (1 + std::abs(db2[i])));
  }
}

TEST(Kernels, ConvBackwardAccumulates) {
  kernels::ConvGeometry g;
  g.input = {1, 1, 4};
  g.kernel = {1, 1, 2};
  g.output = {1, 1, 3};
  const std::vector<real> x{1, 2, 3, 4}, w{1, 1}, dy{1, 1, 1};
  std::vector<real> dw{10, 10};
  kernels::conv_backward(g, x.data(), w.data(), dy.data(), nullptr, dw.data(), nullptr);
  EXPECT_EQ(dw[0], real(16));
  EXPECT_EQ(dw[1], real(19));
}

TEST(Kernels, ConvOpMatchesIndependentOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    oracle::ConvCase c{pick(1, 2), pick(1, 3), pick(1, 3), {pick(1, 8), pick(1, 8), pick(1, 8)}, {}};
    for (int a = 0; a < 3; ++a) c.k[a] = pick(1, std::min<std::size_t>(3, c.in[a]));
    Tensor x({c.batch, c.in_ch, c.in[0], c.in[1], c.in[2]}, random_values(c.batch * c.in_ch * c.in[0] * c.in[1] * c.in[2], rng));
    Tensor w({c.out_ch, c.in_ch, c.k[0], c.k[1], c.k[2]}, random_values(c.out_ch * c.in_ch * c.k[0] * c.k[1] * c.k[2], rng));
    Tensor b({c.out_ch}, random_values(c.out_ch, rng));
    const Tensor y = conv(x, w, b, ConvSpec{3, {c.k[0], c.k[1], c.k[2]}, {}, c.in_ch, c.out_ch});
    const std::vector<double> xd(x.data().begin(), x.data().end()), wd(w.data().begin(), w.data().end()),
        bd(b.data().begin(), b.data().end());
    const auto expected = oracle::conv3d(c, xd, wd, bd);
    ASSERT_EQ(expected.size(), y.size());
    for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_NEAR(y.data()[i], expected[i], 1e-5 * (1 + std::abs(expected[i])));
  }
}

TEST(Kernels, MaxPoolMatchesReference) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    kernels::PoolGeometry g;
    g.planes = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    for (int a = 0; a < 3; ++a) {
      g.input[a] = std::uniform_int_distribution<std::size_t>(1, 9)(rng);
      g.window[a] = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, g.input[a]))(rng);
      g.stride[a] = g.window[a];
      g.output[a] = (g.input[a] - g.window[a]) / g.stride[a] + 1;
    }
    const auto x = random_values(g.planes * g.input_volume(), rng);
    std::vector<real> y1(g.planes * g.output_volume()), y2(y1.size());
    std::vector<std::uint32_t> a1(y1.size()), a2(y1.size());
    kernels::max_pool_forward(g, x.data(), y1.data(), a1.data());
    reference::max_pool_forward(g, x.data(), y2.data(), a2.data());
    EXPECT_EQ(y1, y2);
    EXPECT_EQ(a1, a2);
  }
}

TEST(Kernels, DenseMatchesReference) {
  std::mt19937_64 rng(15);
  const std::size_t batch = 7, n_in = 300, n_out = 13;
  const auto x = random_values(batch * n_in, rng);
  const auto w = random_values(n_in * n_out, rng);
  const auto b = random_values(n_out, rng);
  std::vector<real> y1(batch * n_out), y2(batch * n_out);
  kernels::dense_forward(batch, n_in, n_out, x.data(), w.data(), b.data(), y1.data());
  reference::dense_forward(batch, n_in, n_out, x.data(), w.data(), b.data(), y2.data());
  for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y1[i], y2[i], 1e-4 * (1 + std::abs(y2[i])));
}
