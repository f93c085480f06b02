#include "hetgp/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "hetgp/errors.hpp"

namespace hetgp {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opts) {
  const Eigen::Index d = x0.size();
  if (d == 0) throw InputError("nelder_mead: empty parameter vector");
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;

  int evals = 0;
  auto project = [&](Vector x) { return x.cwiseMax(opts.lower).cwiseMin(opts.upper).eval(); };
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Vector> pts;
  std::vector<double> vals;
  pts.push_back(project(x0));
  vals.push_back(eval(pts[0]));
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector x = pts[0];
    x(i) += opts.initial_step;
    if (x(i) > opts.upper) x(i) = pts[0](i) - opts.initial_step;
    pts.push_back(project(x));
    vals.push_back(eval(pts.back()));
  }

  std::vector<std::size_t> order(pts.size());
  bool converged = false;
  while (evals < opts.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double diam = 0.0;
    for (const auto& p : pts) diam = std::max(diam, (p - pts[best]).cwiseAbs().maxCoeff());
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(spread) && spread <= opts.ftol * (1.0 + std::abs(vals[best])) &&
        diam <= opts.xtol) {
      converged = true;
      break;
    }

    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(d);

    const Vector xr = project(centroid + kReflect * (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Vector xe = project(centroid + kExpand * (xr - centroid));
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Vector xc = outside ? project(centroid + kContract * (xr - centroid))
                              : project(centroid + kContract * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = project(pts[best] + kShrink * (pts[i] - pts[best]));
      vals[i] = eval(pts[i]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  NelderMeadResult r;
  r.x = pts[static_cast<std::size_t>(it - vals.begin())];
  r.value = *it;
  r.evaluations = evals;
  r.converged = converged;
  return r;
}

}  // namespace hetgp
