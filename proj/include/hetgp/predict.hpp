#pragma once

#include <vector>

#include "hetgp/ep.hpp"
#include "hetgp/predictive_result.hpp"

namespace hetgp {

// Latent posterior predictive at one test input. For the noise-only tier the
// phi members are unused and f is the signal itself.
struct LatentPoint {
  double mean_f = 0.0, var_f = 0.0;
  double mean_phi = 0.0, var_phi = 0.0, cov_fphi = 0.0;
  double mean_theta = 0.0, var_theta = 0.0;
  bool has_phi = false;
  // factor applied to cov_fphi to restore a positive definite 2x2 block
  double cross_shrink = 1.0;

  Gaussian2 v() const;
  Gaussian1 f() const { return gaussian1(mean_f, var_f); }
  Gaussian1 theta() const { return gaussian1(mean_theta, var_theta); }
};

using LatentPredictive = std::vector<LatentPoint>;

LatentPredictive latent_predictive(const EPState& state, const EPPriors& priors,
                                   const HyperParams& hp, const Matrix& X, const Matrix& Xs);
LatentPredictive latent_predictive(const EPState& state, const HyperParams& hp, const Matrix& X,
                                   const Matrix& Xs);

// E[y*] = E[f*], V[y*] = V[f*] + exp(E[theta*] + V[theta*]/2)
PredictiveResult predictive_y_n(const LatentPoint& lat);

// y* = exp(phi*/2) f~* + eps with (f~*, phi*) jointly Gaussian and eps ~ N(0, exp(theta*)).
PredictiveResult predictive_y_mn(const LatentPoint& lat);

std::vector<PredictiveResult> predictive_y(const LatentPredictive& lat);

// log N(y_star | mean_y, var_y)
double predictive_log_density(const PredictiveResult& res, double y_star);

// Exact log density of the latent-marginalized predictive by quadrature over
// theta* (and phi*). Diagnostic alternative to the Gaussian approximation.
double predictive_log_density_quadrature(const LatentPoint& lat, double y_star,
                                         const GridSpec& grid = {});

}  // namespace hetgp
