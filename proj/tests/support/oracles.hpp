#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Independent reference computations written directly from the textbook
// definitions. They share no code with the library.
namespace oracle {

struct ConvCase {
  std::size_t batch, in_ch, out_ch;
  std::size_t in[3], k[3];
};

/// Valid cross-correlation, stride 1, over [batch, in_ch, d, h, w] with
/// weights [out_ch, in_ch, kd, kh, kw] and bias [out_ch].
inline std::vector<double> conv3d(const ConvCase& c, std::span<const double> x, std::span<const double> w,
                                  std::span<const double> b) {
  const std::size_t od = c.in[0] - c.k[0] + 1, oh = c.in[1] - c.k[1] + 1, ow = c.in[2] - c.k[2] + 1;
  std::vector<double> y(c.batch * c.out_ch * od * oh * ow);
  auto X = [&](std::size_t n, std::size_t ci, std::size_t z, std::size_t r, std::size_t s) {
    return x[(((n * c.in_ch + ci) * c.in[0] + z) * c.in[1] + r) * c.in[2] + s];
  };
  auto W = [&](std::size_t co, std::size_t ci, std::size_t z, std::size_t r, std::size_t s) {
    return w[(((co * c.in_ch + ci) * c.k[0] + z) * c.k[1] + r) * c.k[2] + s];
  };
  std::size_t idx = 0;
  for (std::size_t n = 0; n < c.batch; ++n)
    for (std::size_t co = 0; co < c.out_ch; ++co)
      for (std::size_t z = 0; z < od; ++z)
        for (std::size_t r = 0; r < oh; ++r)
          for (std::size_t s = 0; s < ow; ++s) {
            double acc = b[co];
            for (std::size_t ci = 0; ci < c.in_ch; ++ci)
              for (std::size_t kz = 0; kz < c.k[0]; ++kz)
                for (std::size_t kr = 0; kr < c.k[1]; ++kr)
                  for (std::size_t ks = 0; ks < c.k[2]; ++ks) acc += X(n, ci, z + kz, r + kr, s + ks) * W(co, ci, kz, kr, ks);
            y[idx++] = acc;
          }
  return y;
}

/// Adam written out step by step in double precision.
struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& theta, const std::vector<double>& g) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    t += 1;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1 * m[i] + (1 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
      const double m_hat = m[i] / (1 - std::pow(beta1, t));
      const double v_hat = v[i] / (1 - std::pow(beta2, t));
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Counts every (prediction, truth) pair separately.
inline Confusion count(std::span<const double> p, std::span<const std::uint8_t> y, double threshold = 0.5) {
  Confusion c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int predicted = p[i] > threshold ? 1 : 0;
    const int truth = y[i];
    c.tp += predicted == 1 && truth == 1;
    c.fp += predicted == 1 && truth == 0;
    c.tn += predicted == 0 && truth == 0;
    c.fn += predicted == 0 && truth == 1;
  }
  return c;
}

}  // namespace oracle
