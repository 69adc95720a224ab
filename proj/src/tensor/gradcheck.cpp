#include "icaclf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "icaclf/error.hpp"

namespace icaclf::inline ICACLF_ABI {

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                                  const GradCheckOptions& options) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = loss_fn();
    }
    tape.backward(loss);
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  const real h = static_cast<real>(options.step);

  auto evaluate = [&](std::uint64_t& fingerprint) {
    NoGradScope no_grad;
    NonSmoothProbe probe;
    const double value = static_cast<double>(loss_fn().item());
    fingerprint = probe.fingerprint();
    return value;
  };

  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    const std::vector<real> analytic(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> indices(p.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_entries_per_tensor && indices.size() > options.max_entries_per_tensor) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_entries_per_tensor);
      std::sort(indices.begin(), indices.end());
    }
    auto values = p.data();
    for (std::size_t i : indices) {
      const real original = values[i];
      std::uint64_t fp_plus = 0, fp_minus = 0;
      values[i] = original + h;
      const double plus = evaluate(fp_plus);
      values[i] = original - h;
      const double minus = evaluate(fp_minus);
      values[i] = original;
      if (options.skip_kinks && fp_plus != fp_minus) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.checked;
      if (rel > result.max_relative_error || result.worst.empty()) {
        if (rel >= result.max_relative_error) {
          result.max_relative_error = rel;
          result.worst = "param" + std::to_string(t) + "[" + std::to_string(i) + "]";
        }
      }
    }
  }
  return result;
}

}  // namespace icaclf
