#include "hetgp/predict.hpp"

#include <cmath>

#include "hetgp/errors.hpp"

namespace hetgp {

Gaussian2 LatentPoint::v() const {
  Gaussian2 g;
  g.mean << mean_f, mean_phi;
  g.cov << var_f, cov_fphi, cov_fphi, var_phi;
  return g;
}

namespace {

// L_b^-1 Kx placed in the rows of block b of the stacked latent vector.
Matrix whitened(const LatentPrior& prior, std::size_t b, const Matrix& Kx) {
  Eigen::Index o = 0;
  for (std::size_t k = 0; k < b; ++k) o += prior.chol_blocks[k].rows();
  Matrix U = Matrix::Zero(prior.size(), Kx.cols());
  U.middleRows(o, Kx.rows()) =
      prior.chol_blocks[b].triangularView<Eigen::Lower>().solve(Kx);
  return U;
}

// K^-1 (mu - m) = nu~ - T (mu - m)
Vector block_alpha(const LatentPosterior& post, const LatentPrior& prior, const SitePrecision& T) {
  return post.nu_centered - T.mul(post.mu - prior.mean);
}

// Per-column dot products diag(A' B).
Vector column_dots(const Matrix& A, const Matrix& B) {
  return (A.array() * B.array()).colwise().sum().transpose();
}

double floor_variance(double v, double prior_var) {
  const double floor = 1e-12 * prior_var;
  return v > floor ? v : floor;
}

}  // namespace

LatentPredictive latent_predictive(const EPState& state, const EPPriors& priors,
                                   const HyperParams& hp, const Matrix& X, const Matrix& Xs) {
  const JointPosterior& post = state.posterior;
  const Eigen::Index n = X.rows();
  const Eigen::Index m = Xs.rows();
  if (static_cast<std::size_t>(n) != post.n || X.cols() != Xs.cols()) {
    throw InputError("latent_predictive: input shapes do not match the fitted state");
  }
  // k' W k with W = K^-1 - K^-1 Sigma K^-1 = L^-T (I - B^-1) L^-1, so the
  // explained variance is |u|^2 - |R^-1 u|^2 for u = L^-1 k
  const Vector alpha_v = block_alpha(post.v, priors.v, v_site_precision(state.sites));
  const Vector alpha_t = block_alpha(post.theta, priors.theta, theta_site_precision(state.sites));
  auto solve_r = [](const LatentPosterior& lp, const Matrix& U) {
    return lp.R.triangularView<Eigen::Lower>().solve(U).eval();
  };

  const Matrix Kt = cross_cov(X, Xs, hp.theta);
  const Vector mean_t = Kt.transpose() * alpha_t;
  const Matrix Ut = whitened(priors.theta, 0, Kt);
  const Vector q_t =
      Ut.colwise().squaredNorm().transpose() - solve_r(post.theta, Ut).colwise().squaredNorm().transpose();

  LatentPredictive out(static_cast<std::size_t>(m));
  const Matrix Kf = cross_cov(X, Xs, hp.f);
  if (post.bivariate) {
    const Matrix Kp = cross_cov(X, Xs, hp.phi);
    const Vector mean_f = Kf.transpose() * alpha_v.head(n);
    const Vector mean_p = Kp.transpose() * alpha_v.tail(n);
    const Matrix Uf = whitened(priors.v, 0, Kf);
    const Matrix Up = whitened(priors.v, 1, Kp);
    const Matrix Vf = solve_r(post.v, Uf);
    const Matrix Vp = solve_r(post.v, Up);
    const Vector q_ff = column_dots(Uf, Uf) - column_dots(Vf, Vf);
    const Vector q_pp = column_dots(Up, Up) - column_dots(Vp, Vp);
    const Vector q_fp = -column_dots(Vf, Vp);
    for (Eigen::Index j = 0; j < m; ++j) {
      LatentPoint& p = out[static_cast<std::size_t>(j)];
      p.has_phi = true;
      p.mean_f = hp.f.constant_mean + mean_f(j);
      p.var_f = floor_variance(hp.f.magnitude() - q_ff(j), hp.f.magnitude());
      p.mean_phi = hp.phi.constant_mean + mean_p(j);
      p.var_phi = floor_variance(hp.phi.magnitude() - q_pp(j), hp.phi.magnitude());
      p.cov_fphi = -q_fp(j);
      const double lim = std::sqrt(p.var_f * p.var_phi);
      if (std::abs(p.cov_fphi) >= lim) {
        p.cross_shrink = (1.0 - 1e-9) * lim / std::abs(p.cov_fphi);
        p.cov_fphi *= p.cross_shrink;
      }
    }
  } else {
    const Vector mean_f = Kf.transpose() * alpha_v;
    const Matrix Uf = whitened(priors.v, 0, Kf);
    const Vector q_ff = column_dots(Uf, Uf) - solve_r(post.v, Uf).colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
      LatentPoint& p = out[static_cast<std::size_t>(j)];
      p.mean_f = hp.f.constant_mean + mean_f(j);
      p.var_f = floor_variance(hp.f.magnitude() - q_ff(j), hp.f.magnitude());
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    LatentPoint& p = out[static_cast<std::size_t>(j)];
    p.mean_theta = hp.theta.constant_mean + mean_t(j);
    p.var_theta = floor_variance(hp.theta.magnitude() - q_t(j), hp.theta.magnitude());
  }
  return out;
}

LatentPredictive latent_predictive(const EPState& state, const HyperParams& hp, const Matrix& X,
                                   const Matrix& Xs) {
  return latent_predictive(state, build_priors(X, state.kind, hp), hp, X, Xs);
}

PredictiveResult predictive_y_n(const LatentPoint& lat) {
  PredictiveResult r;
  r.mean_y = lat.mean_f;
  r.var_y = lat.var_f + std::exp(lat.mean_theta + 0.5 * lat.var_theta);
  return r;
}

PredictiveResult predictive_y_mn(const LatentPoint& lat) {
  const double mf = lat.mean_f, mp = lat.mean_phi;
  const double sff = lat.var_f, sfp = lat.cov_fphi, spp = lat.var_phi;
  PredictiveResult r;
  r.mean_y = std::exp(0.5 * mp + 0.125 * spp) * (mf + 0.5 * sfp);
  // E[exp(phi) f~^2]: tilting by exp(phi) shifts the mean by the second column of the covariance
  const double shifted = mf + sfp;
  const double second = std::exp(mp + 0.5 * spp) * (shifted * shifted + sff);
  r.var_y = second - r.mean_y * r.mean_y + std::exp(lat.mean_theta + 0.5 * lat.var_theta);
  return r;
}

std::vector<PredictiveResult> predictive_y(const LatentPredictive& lat) {
  std::vector<PredictiveResult> out;
  out.reserve(lat.size());
  for (const auto& p : lat) out.push_back(p.has_phi ? predictive_y_mn(p) : predictive_y_n(p));
  return out;
}

double predictive_log_density(const PredictiveResult& res, double y_star) {
  return log_normal_pdf(y_star, res.mean_y, res.var_y);
}

double predictive_log_density_quadrature(const LatentPoint& lat, double y_star,
                                         const GridSpec& grid) {
  if (lat.has_phi) return tilted_moments_mn(y_star, lat.v(), lat.theta(), grid).log_zhat;
  return tilted_moments_n(y_star, lat.f(), lat.theta(), grid).log_zhat;
}

}  // namespace hetgp
