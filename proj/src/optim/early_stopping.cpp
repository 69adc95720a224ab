#include <cmath>

#include "icaclf/error.hpp"
#include "icaclf/optim.hpp"

namespace icaclf::inline ICACLF_ABI {

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience_ == 0) throw ParameterError("early stopping: patience must be positive");
}

StopDecision EarlyStopping::step(double metric, const std::function<std::string()>& snapshot) {
  ++epochs_;
  if (std::isfinite(metric) && metric > best_metric_) {
    best_metric_ = metric;
    best_epoch_ = epochs_;
    since_improvement_ = 0;
    best_snapshot_ = snapshot ? snapshot() : std::string();
  } else {
    ++since_improvement_;
  }
  return since_improvement_ >= patience_ ? StopDecision::stop : StopDecision::proceed;
}

}  // namespace icaclf
