#pragma once

#include "icaclf/config.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "icaclf/tensor.hpp"

namespace icaclf::inline ICACLF_ABI {

struct GradCheckOptions {
  double step = 1e-3;
  // 0 checks every entry; otherwise a seeded random subset per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  // Skip entries whose +/- step evaluations take different ReLU / pooling /
  // clamp decisions; central differences are meaningless across a kink.
  bool skip_kinks = true;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::string worst;  // "tensor[index]" of the largest error
};

/// Compares reverse-mode gradients of `loss_fn` with central differences.
/// Relative error per entry is |analytic - numeric| / max(|analytic|,
/// |numeric|, 1e-8). loss_fn must be deterministic and return a scalar.
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                                  const GradCheckOptions& options = {});

}  // namespace icaclf
