#pragma once

#include <cstdint>
#include <vector>

#include "hetgp/ep.hpp"
#include "hetgp/model.hpp"
#include "hetgp/predictive_result.hpp"

namespace hetgp {

// Elliptical slice sampling of the latent values at fixed hyperparameters.
// After `n_burnin` sweeps, `n_samples` sweeps are run and every `thinning`-th
// is stored. One sweep updates the v block (f, or stacked (f~, phi)) and
// then the theta block.
struct ChainConfig {
  int n_samples = 20000;
  int n_burnin = 5000;
  int thinning = 2;
  std::uint64_t seed = 0;
  bool sample_v = true;
  bool sample_theta = true;
  // Diagnostic: replace the likelihood by a constant (the chain then samples the prior).
  bool constant_likelihood = false;
};

struct ChainOutput {
  ModelKind kind = ModelKind::ep_n;
  std::size_t n = 0;
  Matrix v;      // draws x (n or 2n), same layout as the EP v block
  Matrix theta;  // draws x n
  Vector ess_v;
  Vector ess_theta;
  double mean_shrinks_v = 0.0;  // average slice shrinkages per update
  double mean_shrinks_theta = 0.0;
  std::size_t draws() const { return static_cast<std::size_t>(theta.rows()); }
};

// Throws InitializationError when the log likelihood at the prior mean is not finite.
ChainOutput ess_sample(const Matrix& X, const Vector& y, ModelKind kind, const HyperParams& hp,
                       const ChainConfig& cfg = {});

// Exact log likelihood of one latent configuration.
double latent_log_likelihood(const Vector& y, ModelKind kind, const Vector& v, const Vector& theta);

// Effective sample size by Geyer's initial monotone sequence estimator.
double effective_sample_size(const Vector& draws);
// Split R-hat over several chains of one scalar quantity.
double split_rhat(const std::vector<Vector>& chains);

struct DiscrepancyReport {
  Vector mean_z;    // |mu_EP - mu_MC| / sd_MC, v latents then theta latents
  Vector sd_ratio;  // sd_EP / sd_MC
  Vector ess;
  double max_mean_z = 0.0;
  double min_sd_ratio = 0.0;
  double max_sd_ratio = 0.0;
  double min_ess = 0.0;
  bool reliable = true;  // false when some latent has ESS < 100
};

DiscrepancyReport compare_to_ep(const ChainOutput& chain, const EPState& state);

// Per-point mixture over draws of the Gaussian predictive given each draw.
struct McPredictive {
  std::vector<PredictiveResult> moments;  // mixture mean and variance
  Matrix draw_mean;                       // draws x m
  Matrix draw_var;                        // draws x m
  // log of the mixture density at y_star for point j
  double log_density(Eigen::Index j, double y_star) const;
  // expected log mixture density under N(true_mean, true_sd^2) (Gauss-Hermite)
  double expected_log_density(Eigen::Index j, double true_mean, double true_sd) const;
};

// Uses at most `max_draws` evenly spaced stored draws.
McPredictive mc_predictive(const ChainOutput& chain, const Matrix& X, const HyperParams& hp,
                           const Matrix& Xs, std::size_t max_draws = 2000);

}  // namespace hetgp
