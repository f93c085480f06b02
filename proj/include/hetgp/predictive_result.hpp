#pragma once

#include <optional>

namespace hetgp {

// Predictive moments of y* at one test input.
struct PredictiveResult {
  double mean_y = 0.0;
  double var_y = 1.0;
  std::optional<double> log_density;
};

}  // namespace hetgp
