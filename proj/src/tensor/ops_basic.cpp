#include <algorithm>
#include <cmath>
#include <numeric>

#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"
#include "icaclf/kernels.hpp"
#include "icaclf/ops.hpp"

namespace icaclf::inline ICACLF_ABI {

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2) {
    throw DimensionError("dense: expected input [batch, n_in] and weight [n_out, n_in], got " +
                         to_string(input.shape()) + " and " + to_string(weight.shape()));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t n_in = input.dim(1);
  const std::size_t n_out = weight.dim(0);
  if (weight.dim(1) != n_in) {
    throw DimensionError("dense: input features " + std::to_string(n_in) + " != weight columns " +
                         std::to_string(weight.dim(1)));
  }
  if (bias.defined() && bias.shape() != Shape{n_out}) {
    throw DimensionError("dense: bias shape " + to_string(bias.shape()));
  }
  Tensor out(Shape{batch, n_out});
  kernels::dense_forward(batch, n_in, n_out, input.data().data(), weight.data().data(),
                         bias.defined() ? bias.data().data() : nullptr, out.data().data());
  if (needs_grad({&input, &weight, &bias})) {
    Tape::active()->record(out, [=]() {
      kernels::dense_backward(batch, n_in, n_out, input.data().data(), weight.data().data(),
                              out.grad().data(), input.requires_grad() ? input.grad().data() : nullptr,
                              weight.requires_grad() ? weight.grad().data() : nullptr,
                              bias.defined() && bias.requires_grad() ? bias.grad().data() : nullptr);
    });
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > real(0) ? x[i] : real(0);
  if (NonSmoothProbe::active()) {
    Fnv1a h;
    for (std::size_t i = 0; i < x.size(); ++i) h.update_value(static_cast<unsigned char>(x[i] > real(0)));
    NonSmoothProbe::mix(h.digest());
  }
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto dx = input.grad();
      auto xs = input.data();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (xs[i] > real(0)) dx[i] += dy[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& input) {
  Tensor out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = real(1) / (real(1) + std::exp(-x[i]));
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto dx = input.grad();
      auto ys = out.data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * ys[i] * (real(1) - ys[i]);
    });
  }
  return out;
}

Tensor tanh(const Tensor& input) {
  Tensor out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto dx = input.grad();
      auto ys = out.data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (real(1) - ys[i] * ys[i]);
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  if (needs_grad({&a, &b})) {
    Tape::active()->record(out, [=]() {
      auto dz = out.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto d = t->grad();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dz[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& input, real factor) {
  Tensor out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * factor;
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto dx = input.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * factor;
    });
  }
  return out;
}

Tensor sum(const Tensor& input) {
  auto x = input.data();
  Tensor out = Tensor::scalar(std::accumulate(x.begin(), x.end(), real(0)));
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      const real d = out.grad()[0];
      auto dx = input.grad();
      for (auto& v : dx) v += d;
    });
  }
  return out;
}

Tensor flatten(const Tensor& input) {
  if (input.rank() < 2) throw DimensionError("flatten: expected a batch axis plus features");
  const std::size_t batch = input.dim(0);
  Tensor out(Shape{batch, input.size() / batch}, std::vector<real>(input.data().begin(), input.data().end()));
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto dx = input.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw DimensionError("concat: no inputs");
  const std::size_t batch = inputs.front().dim(0);
  std::vector<std::size_t> widths;
  for (const auto& t : inputs) {
    if (t.rank() != 2) throw DimensionError("concat: expected [batch, n] inputs, got " + to_string(t.shape()));
    if (t.dim(0) != batch) {
      throw DimensionError("concat: batch axis mismatch (" + std::to_string(t.dim(0)) + " vs " +
                           std::to_string(batch) + ")");
    }
    widths.push_back(t.dim(1));
  }
  const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  Tensor out(Shape{batch, total});
  auto dst = out.data();
  for (std::size_t n = 0; n < batch; ++n) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto src = inputs[k].data();
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(n * widths[k]), widths[k],
                  dst.begin() + static_cast<std::ptrdiff_t>(n * total + offset));
      offset += widths[k];
    }
  }
  std::vector<Tensor> saved(inputs.begin(), inputs.end());
  bool any = false;
  for (const auto& t : saved) any = any || needs_grad({&t});
  if (any) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < saved.size(); ++k) {
        if (saved[k].requires_grad()) {
          auto dx = saved[k].grad();
          for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t i = 0; i < widths[k]; ++i) dx[n * widths[k] + i] += dy[n * total + offset + i];
        }
        offset += widths[k];
      }
    });
  }
  return out;
}

std::vector<Tensor> split(const Tensor& input, std::span<const std::size_t> widths) {
  if (input.rank() != 2) throw DimensionError("split: expected [batch, n], got " + to_string(input.shape()));
  const std::size_t batch = input.dim(0);
  const std::size_t total = input.dim(1);
  if (std::accumulate(widths.begin(), widths.end(), std::size_t{0}) != total) {
    throw DimensionError("split: widths do not sum to feature axis " + std::to_string(total));
  }
  std::vector<Tensor> parts;
  std::size_t offset = 0;
  auto src = input.data();
  for (std::size_t w : widths) {
    Tensor part(Shape{batch, w});
    auto dst = part.data();
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t i = 0; i < w; ++i) dst[n * w + i] = src[n * total + offset + i];
    if (needs_grad({&input})) {
      Tape::active()->record(part, [=]() {
        auto dy = part.grad();
        auto dx = input.grad();
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t i = 0; i < w; ++i) dx[n * total + offset + i] += dy[n * w + i];
      });
    }
    parts.push_back(part);
    offset += w;
  }
  return parts;
}

Tensor dropout(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return input;
  Tensor out(input.shape());
  auto mask = std::make_shared<std::vector<real>>(input.size());
  const real keep_scale = real(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = uniform(rng) < rate ? real(0) : keep_scale;
    y[i] = x[i] * (*mask)[i];
  }
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dy = out.grad();
      auto dx = input.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor bce_loss(const Tensor& probability, const Tensor& label) {
  if (probability.shape() != label.shape()) {
    throw DimensionError("bce_loss: probability " + to_string(probability.shape()) + " vs label " +
                         to_string(label.shape()));
  }
  auto p = probability.data();
  auto y = label.data();
  for (real v : y) {
    if (v != real(0) && v != real(1)) throw LabelError("bce_loss: labels must be 0 or 1");
  }
  const std::size_t n = p.size();
  const real lo = kBceEpsilon;
  const real hi = real(1) - kBceEpsilon;
  double total = 0;
  std::uint64_t clamp_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const real pc = std::clamp(p[i], lo, hi);
    if (pc != p[i]) clamp_hits = clamp_hits * 31 + i + 1;
    total -= y[i] == real(1) ? std::log(double(pc)) : std::log(1.0 - double(pc));
  }
  NonSmoothProbe::mix(clamp_hits);
  Tensor out = Tensor::scalar(real(total / double(n)));
  if (needs_grad({&probability})) {
    Tape::active()->record(out, [=]() {
      const real d = out.grad()[0] / real(n);
      auto ps = probability.data();
      auto ys = label.data();
      auto dp = probability.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const real pc = std::clamp(ps[i], lo, hi);
        dp[i] += d * (ys[i] == real(1) ? -real(1) / pc : real(1) / (real(1) - pc));
      }
    });
  }
  return out;
}

Tensor bce_with_logits(const Tensor& logit, const Tensor& label) {
  if (logit.shape() != label.shape()) {
    throw DimensionError("bce_with_logits: logit " + to_string(logit.shape()) + " vs label " +
                         to_string(label.shape()));
  }
  auto z = logit.data();
  auto y = label.data();
  for (real v : y) {
    if (v != real(0) && v != real(1)) throw LabelError("bce_with_logits: labels must be 0 or 1");
  }
  const std::size_t n = z.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z[i];
    total += std::max(zi, 0.0) - zi * double(y[i]) + std::log1p(std::exp(-std::abs(zi)));
  }
  Tensor out = Tensor::scalar(real(total / double(n)));
  if (needs_grad({&logit})) {
    Tape::active()->record(out, [=]() {
      const double d = double(out.grad()[0]) / double(n);
      auto zs = logit.data();
      auto ys = label.data();
      auto dz = logit.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-double(zs[i])));
        dz[i] += real(d * (p - double(ys[i])));
      }
    });
  }
  return out;
}

}  // namespace icaclf
