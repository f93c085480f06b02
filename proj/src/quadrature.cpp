#include "hetgp/quadrature.hpp"

#include <algorithm>
#include <numeric>

#include "hetgp/errors.hpp"

namespace hetgp {

double QuadratureGrid::length() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

QuadratureGrid simpson_grid(double center, double sd, const GridSpec& spec) {
  if (spec.nodes < 3 || spec.nodes % 2 == 0) {
    throw InputError("Simpson grid needs an odd node count >= 3");
  }
  if (!(sd > 0.0) || !(spec.half_width_sd > 0.0)) {
    throw InputError("Simpson grid needs a positive width");
  }
  const int m = spec.nodes;
  const double lo = center - spec.half_width_sd * sd;
  const double h = 2.0 * spec.half_width_sd * sd / (m - 1);
  QuadratureGrid g;
  g.nodes.resize(m);
  g.weights.resize(m);
  for (int k = 0; k < m; ++k) {
    g.nodes[k] = lo + k * h;
    const double c = (k == 0 || k == m - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    g.weights[k] = c * h / 3.0;
  }
  return g;
}

double clamp_log_variance(double x) {
  return std::clamp(x, -kLogVarianceClamp, kLogVarianceClamp);
}

}  // namespace hetgp
