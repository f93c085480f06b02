#pragma once

#include <functional>

#include "hetgp/kernels.hpp"

namespace hetgp {

struct NelderMeadOptions {
  int max_evals = 400;
  // stop when the spread of simplex values and the simplex diameter both fall below these
  double ftol = 1e-6;
  double xtol = 1e-4;
  double initial_step = 0.5;
  double lower = -20.0;
  double upper = 20.0;
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Minimizes f over the box [lower, upper]^d; points are projected onto the box.
// f may return +inf for infeasible points.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opts = {});

}  // namespace hetgp
