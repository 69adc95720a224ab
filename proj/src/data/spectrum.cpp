#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>

#include "icaclf/data.hpp"
#include "icaclf/error.hpp"

namespace icaclf::inline ICACLF_ABI {

std::vector<double> standardize(std::span<const double> values) {
  if (values.size() < 2) throw DegenerateInputError("standardize: need at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0) || sd < 1e-12 * std::max(1.0, std::abs(mean))) {
    throw DegenerateInputError("standardize: input is constant");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

std::vector<float> standardize(std::span<const float> values) {
  const std::vector<double> wide(values.begin(), values.end());
  const auto z = standardize(wide);
  return {z.begin(), z.end()};
}

namespace {

// FFTW planning is not thread safe; plans are created once per length under
// a lock and executed through the new-array interface.
struct PlanCache {
  std::mutex mutex;
  std::map<std::size_t, fftw_plan> plans;

  fftw_plan get(std::size_t n) {
    std::lock_guard lock(mutex);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans.emplace(n, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [n, plan] : plans) fftw_destroy_plan(plan);
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

std::vector<double> power_spectrum(std::span<const double> timecourse) {
  const std::size_t n = timecourse.size();
  if (n < 4) throw DegenerateInputError("power_spectrum: need at least 4 samples");
  std::vector<double> x = standardize(timecourse);
  std::vector<fftw_complex> spectrum(n / 2 + 1);
  fftw_execute_dft_r2c(plan_cache().get(n), x.data(), spectrum.data());
  std::vector<double> power(n / 2);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double re = spectrum[k][0];
    const double im = spectrum[k][1];
    power[k - 1] = (re * re + im * im) / static_cast<double>(n);
  }
  return power;
}

std::vector<float> power_spectrum(std::span<const float> timecourse) {
  const std::vector<double> wide(timecourse.begin(), timecourse.end());
  const auto p = power_spectrum(std::span<const double>(wide));
  return {p.begin(), p.end()};
}

}  // namespace icaclf
