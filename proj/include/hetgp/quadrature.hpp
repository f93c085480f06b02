#pragma once

#include <vector>

namespace hetgp {

struct GridSpec {
  int nodes = 49;              // per dimension, must be odd
  double half_width_sd = 6.0;  // grid covers center +/- half_width_sd * sd
};

// Composite Simpson rule on [center - w*sd, center + w*sd].
struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
  double length() const;
};

QuadratureGrid simpson_grid(double center, double sd, const GridSpec& spec = {});

// Clamp applied to log-variance node values before exponentiation.
inline constexpr double kLogVarianceClamp = 30.0;
double clamp_log_variance(double x);

}  // namespace hetgp
