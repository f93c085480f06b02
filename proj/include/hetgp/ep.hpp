#pragma once

#include <optional>
#include <vector>

#include "hetgp/gaussian.hpp"
#include "hetgp/kernels.hpp"
#include "hetgp/model.hpp"
#include "hetgp/quadrature.hpp"

namespace hetgp {

// Site approximations in natural parameters, one per observation.
struct SiteSet {
  std::vector<Site1> theta;
  std::vector<Site1> f;  // noise-only tier
  std::vector<Site2> v;  // (f~_i, phi_i) tiers
  std::vector<double> log_zhat;

  static SiteSet zeros(std::size_t n, bool bivariate);
  bool bivariate() const { return !v.empty(); }
  std::size_t size() const { return theta.size(); }
};

// Gaussian prior over one stacked latent vector whose covariance is block
// diagonal (one block per independent GP, jitter included).
struct LatentPrior {
  Vector mean;
  std::vector<Matrix> K_blocks;
  std::vector<Matrix> chol_blocks;  // lower Cholesky factors of K_blocks

  Eigen::Index size() const { return mean.size(); }
  Matrix K() const;
  static LatentPrior from_blocks(std::vector<Matrix> blocks, Vector mean);
};

struct EPPriors {
  LatentPrior v;  // f (n) or (f~_1..f~_n, phi_1..phi_n)
  LatentPrior theta;
  bool bivariate = false;
};

EPPriors build_priors(const Matrix& X, ModelKind kind, const HyperParams& hp);

// Posterior over one latent vector given its prior and diagonal(-block) sites.
// With K = L L' and B = I + L' T L = R R', Sigma = Z' Z where Z = R^-1 L'.
struct LatentPosterior {
  Vector mu;
  Vector var;    // marginal variances
  Vector cross;  // Sigma(i, n + i) for the bivariate tier
  Vector nu_centered;       // site nu minus T * prior mean
  double log_det_i_kt = 0;  // log det(I + K T) = log det B
  Matrix R;
  Matrix Z;

  Matrix covariance() const;
};

struct JointPosterior {
  LatentPosterior v;
  LatentPosterior theta;
  std::size_t n = 0;
  bool bivariate = false;

  Gaussian1 theta_marginal(std::size_t i) const;
  Gaussian1 f_marginal(std::size_t i) const;
  Gaussian2 v_marginal(std::size_t i) const;
};

// Site precision of a stacked latent vector: diagonal plus, for the bivariate
// tier, the coupling between element i and element n + i.
struct SitePrecision {
  Vector diag;
  Vector cross;  // empty unless bivariate

  Matrix left_mul(const Matrix& M) const;   // T * M
  Matrix right_mul(const Matrix& M) const;  // M * T
  Vector mul(const Vector& x) const;
  Matrix dense() const;
};

SitePrecision theta_site_precision(const SiteSet& s);
SitePrecision v_site_precision(const SiteSet& s);
Vector theta_site_nu(const SiteSet& s);
Vector v_site_nu(const SiteSet& s);

template <int D>
struct Cavity {
  Gaussian<D> moments;
  NatParams<D> natural;
};

// Marginal divided by site. Throws CavityError when the cavity precision is
// not positive definite.
template <int D>
Cavity<D> compute_cavity(const Gaussian<D>& marginal, const NatParams<D>& site);

template <int D>
struct TiltedMoments {
  double log_zhat = 0.0;
  Gaussian<D> v;
  Gaussian1 theta;
};

// Likelihood N(y | f, exp(theta)); integral over f analytic, theta by Simpson.
TiltedMoments<1> tilted_moments_n(double y, const Gaussian1& cavity_f,
                                  const Gaussian1& cavity_theta, const GridSpec& grid = {});

// Likelihood N(y | exp(phi/2) f~, exp(theta)); f~ analytic given phi, (phi, theta)
// by a tensor Simpson grid.
TiltedMoments<2> tilted_moments_mn(double y, const Gaussian2& cavity_v,
                                   const Gaussian1& cavity_theta, const GridSpec& grid = {});

// Throws NumericalError when the combined precision is not positive definite.
JointPosterior recompute_posterior(const EPPriors& priors, const SiteSet& sites);

struct EPConfig {
  double damping = 0.8;
  double min_damping = 0.1;
  int max_iter = 200;
  double tol = 1e-6;       // on |change in log Z_EP| between sweeps
  double site_tol = 1e-6;  // on the largest site change relative to max(1, |marginal natural parameters|)
  GridSpec grid;
  // fraction of cavity failures in a sweep that halves that sweep's damping
  double cavity_failure_fraction = 0.1;
  // sweeps without the site drift halving before damping is halved for good
  int stall_window = 20;
};

struct EPState {
  ModelKind kind = ModelKind::ep_n;
  SiteSet sites;
  JointPosterior posterior;
  double log_z_ep = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_z_history;
  int skipped_last_sweep = 0;
  int skipped_total = 0;
};

// Per-site results of one parallel sweep, all from the same posterior snapshot.
struct SweepMoments {
  std::vector<std::optional<Cavity<1>>> cav_theta;
  std::vector<std::optional<Cavity<1>>> cav_f;
  std::vector<std::optional<Cavity<2>>> cav_v;
  std::vector<std::optional<TiltedMoments<1>>> tilted_n;
  std::vector<std::optional<TiltedMoments<2>>> tilted_mn;
  int cavity_failures = 0;
  int quadrature_failures = 0;
  bool ok(std::size_t i) const;
};

SweepMoments compute_sweep_moments(const JointPosterior& post, const SiteSet& sites,
                                   const Vector& y, ModelKind kind, const GridSpec& grid);

// Damped parallel site update. Sites whose cavity or quadrature failed keep
// their previous parameters.
SiteSet update_sites_parallel(const SiteSet& sites, const SweepMoments& moments, ModelKind kind,
                              double delta);
SiteSet update_sites_parallel(const EPState& state, const Vector& y, double delta,
                              const GridSpec& grid = {});

// log Z_EP for the given posterior and sites; uses sites.log_zhat.
// NaN when some cavity is not positive definite.
double log_marginal_ep(const EPPriors& priors, const JointPosterior& post, const SiteSet& sites);

EPState run_ep(const Matrix& X, const Vector& y, const EPPriors& priors, ModelKind kind,
               const EPConfig& config = {}, const SiteSet* warm_start = nullptr);
EPState run_ep(const Matrix& X, const Vector& y, const HyperParams& hp, ModelKind kind,
               const EPConfig& config = {}, const SiteSet* warm_start = nullptr);

}  // namespace hetgp
