#pragma once

#include "icaclf/config.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "icaclf/tensor.hpp"

namespace icaclf::inline ICACLF_ABI {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Gradients are read, never cleared; the caller
/// zeroes them between steps.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

enum class StopDecision { proceed, stop };

/// Patience-based early stopping on a higher-is-better validation metric.
/// Improvement is strict; the snapshot callback runs only on improvement so
/// the stored snapshot always belongs to best_metric().
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  StopDecision step(double metric, const std::function<std::string()>& snapshot);

  std::size_t patience() const { return patience_; }
  double best_metric() const { return best_metric_; }
  // 1-based epoch of the best metric; 0 before the first step.
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t epochs_seen() const { return epochs_; }
  std::size_t epochs_since_improvement() const { return since_improvement_; }
  const std::string& best_snapshot() const { return best_snapshot_; }

 private:
  std::size_t patience_;
  double best_metric_ = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epochs_ = 0;
  std::size_t since_improvement_ = 0;
  std::string best_snapshot_;
};

}  // namespace icaclf
