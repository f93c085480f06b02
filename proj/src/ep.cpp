#include "hetgp/ep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hetgp/errors.hpp"

namespace hetgp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxCorrelation = 1.0 - 1e-10;

double log_sum_exp(const std::vector<double>& xs, double& max_out) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) {
    throw QuadratureError("tilted normalizer underflowed or is not finite");
  }
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  max_out = m;
  return m + std::log(s);
}

LatentPosterior posterior_block(const LatentPrior& prior, const SitePrecision& T,
                                const Vector& nu) {
  const Eigen::Index N = prior.size();
  const std::size_t nb = prior.chol_blocks.size();
  std::vector<Eigen::Index> off(nb + 1, 0);
  for (std::size_t b = 0; b < nb; ++b) off[b + 1] = off[b] + prior.chol_blocks[b].rows();
  const bool coupled = T.cross.size() > 0;
  if (coupled && (nb != 2 || T.cross.size() != off[1] || off[1] != off[2] - off[1])) {
    throw InputError("posterior_block: cross site precision needs two equal prior blocks");
  }

  // B = I + L' T L, assembled block by block
  Matrix B = Matrix::Zero(N, N);
  for (std::size_t b = 0; b < nb; ++b) {
    const Matrix& L = prior.chol_blocks[b];
    const Matrix DL = T.diag.segment(off[b], L.rows()).asDiagonal() * L;
    B.block(off[b], off[b], L.rows(), L.rows()).noalias() =
        L.transpose().triangularView<Eigen::Upper>() * DL;
  }
  if (coupled) {
    const Matrix& L0 = prior.chol_blocks[0];
    const Matrix& L1 = prior.chol_blocks[1];
    const Matrix CL = T.cross.asDiagonal() * L1;
    const Eigen::Index n = L0.rows();
    B.topRightCorner(n, n).noalias() = L0.transpose().triangularView<Eigen::Upper>() * CL;
    B.bottomLeftCorner(n, n) = B.topRightCorner(n, n).transpose();
  }
  B.diagonal().array() += 1.0;
  const Eigen::LLT<Matrix> llt(B);
  if (llt.info() != Eigen::Success || !B.allFinite()) {
    throw NumericalError("posterior precision is not positive definite");
  }

  LatentPosterior out;
  out.R = llt.matrixL();
  // Z = R^-1 L' by block forward substitution; L' is block diagonal so Z is
  // block lower triangular
  out.Z = Matrix::Zero(N, N);
  for (std::size_t b = 0; b < nb; ++b) {
    const Eigen::Index nbk = off[b + 1] - off[b];
    auto Zbb = out.Z.block(off[b], off[b], nbk, nbk);
    Zbb = prior.chol_blocks[b].transpose();
    out.R.block(off[b], off[b], nbk, nbk).triangularView<Eigen::Lower>().solveInPlace(Zbb);
    for (std::size_t c = b + 1; c < nb; ++c) {
      const Eigen::Index nc = off[c + 1] - off[c];
      auto Zcb = out.Z.block(off[c], off[b], nc, nbk);
      Zcb.noalias() = -out.R.block(off[c], off[b], nc, off[c] - off[b]) *
                      out.Z.block(off[b], off[b], off[c] - off[b], nbk);
      out.R.block(off[c], off[c], nc, nc).triangularView<Eigen::Lower>().solveInPlace(Zcb);
    }
  }
  out.log_det_i_kt = 2.0 * out.R.diagonal().array().log().sum();

  out.var = out.Z.colwise().squaredNorm().transpose();
  if (!(out.var.array() > 0.0).all() || !out.var.allFinite()) {
    throw NumericalError("posterior covariance has a non-positive variance");
  }
  if (coupled) {
    const Eigen::Index n = off[1];
    out.cross.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.cross(i) = out.Z.col(i).dot(out.Z.col(n + i));
  }
  out.nu_centered = nu - T.mul(prior.mean);
  out.mu = prior.mean + out.Z.transpose() * (out.Z * out.nu_centered);
  return out;
}

template <int D>
Gaussian<D> centered(Gaussian<D> g, const typename Gaussian<D>::Vec& prior_mean) {
  g.mean -= prior_mean;
  return g;
}

}  // namespace

SiteSet SiteSet::zeros(std::size_t n, bool bivariate) {
  SiteSet s;
  s.theta.assign(n, Site1{});
  if (bivariate) {
    s.v.assign(n, Site2{});
  } else {
    s.f.assign(n, Site1{});
  }
  s.log_zhat.assign(n, 0.0);
  return s;
}

Matrix LatentPrior::K() const {
  Matrix K = Matrix::Zero(size(), size());
  Eigen::Index o = 0;
  for (const auto& b : K_blocks) {
    K.block(o, o, b.rows(), b.rows()) = b;
    o += b.rows();
  }
  return K;
}

LatentPrior LatentPrior::from_blocks(std::vector<Matrix> blocks, Vector mean) {
  LatentPrior p;
  Eigen::Index total = 0;
  for (const auto& b : blocks) {
    if (b.rows() != b.cols()) throw InputError("prior covariance blocks must be square");
    total += b.rows();
    Eigen::LLT<Matrix> llt(b);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("prior covariance block is not positive definite");
    }
    p.chol_blocks.push_back(llt.matrixL());
  }
  if (total != mean.size()) throw InputError("prior mean does not match the covariance size");
  p.K_blocks = std::move(blocks);
  p.mean = std::move(mean);
  return p;
}

Matrix LatentPosterior::covariance() const { return Z.transpose() * Z; }

EPPriors build_priors(const Matrix& X, ModelKind kind, const HyperParams& hp) {
  if (!is_ep(kind)) {
    throw InputError("build_priors: not an EP model kind");
  }
  const Eigen::Index n = X.rows();
  EPPriors p;
  p.bivariate = has_signal_process(kind);
  auto block = [&](const KernelParams& kp, LatentPrior& prior) {
    Matrix K = cov_matrix(X, kp);
    const auto chol = robust_cholesky(K, kp.magnitude());
    K.diagonal().array() += chol.jitter;
    prior.K_blocks.push_back(std::move(K));
    prior.chol_blocks.push_back(chol.llt.matrixL());
  };
  block(hp.theta, p.theta);
  p.theta.mean = Vector::Constant(n, hp.theta.constant_mean);
  block(hp.f, p.v);
  if (p.bivariate) {
    block(hp.phi, p.v);
    p.v.mean = Vector::Zero(2 * n);
    p.v.mean.tail(n).setConstant(hp.phi.constant_mean);
    p.v.mean.head(n).setConstant(hp.f.constant_mean);
  } else {
    p.v.mean = Vector::Constant(n, hp.f.constant_mean);
  }
  return p;
}

Gaussian1 JointPosterior::theta_marginal(std::size_t i) const {
  const auto k = static_cast<Eigen::Index>(i);
  return gaussian1(theta.mu(k), theta.var(k));
}

Gaussian1 JointPosterior::f_marginal(std::size_t i) const {
  const auto k = static_cast<Eigen::Index>(i);
  return gaussian1(v.mu(k), v.var(k));
}

Gaussian2 JointPosterior::v_marginal(std::size_t i) const {
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(i + n);
  Gaussian2 g;
  g.mean << v.mu(a), v.mu(b);
  g.cov << v.var(a), v.cross(a), v.cross(a), v.var(b);
  return g;
}

Matrix SitePrecision::left_mul(const Matrix& M) const {
  Matrix out = diag.asDiagonal() * M;
  if (cross.size() > 0) {
    const Eigen::Index n = cross.size();
    out.topRows(n) += cross.asDiagonal() * M.bottomRows(n);
    out.bottomRows(n) += cross.asDiagonal() * M.topRows(n);
  }
  return out;
}

Matrix SitePrecision::right_mul(const Matrix& M) const {
  Matrix out = M * diag.asDiagonal();
  if (cross.size() > 0) {
    const Eigen::Index n = cross.size();
    out.leftCols(n) += M.rightCols(n) * cross.asDiagonal();
    out.rightCols(n) += M.leftCols(n) * cross.asDiagonal();
  }
  return out;
}

Vector SitePrecision::mul(const Vector& x) const {
  Vector out = diag.cwiseProduct(x);
  if (cross.size() > 0) {
    const Eigen::Index n = cross.size();
    out.head(n) += cross.cwiseProduct(x.tail(n));
    out.tail(n) += cross.cwiseProduct(x.head(n));
  }
  return out;
}

Matrix SitePrecision::dense() const {
  Matrix T = diag.asDiagonal();
  const Eigen::Index n = cross.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    T(i, n + i) = cross(i);
    T(n + i, i) = cross(i);
  }
  return T;
}

SitePrecision theta_site_precision(const SiteSet& s) {
  SitePrecision T;
  T.diag.resize(static_cast<Eigen::Index>(s.theta.size()));
  for (std::size_t i = 0; i < s.theta.size(); ++i) T.diag(static_cast<Eigen::Index>(i)) = s.theta[i].tau(0, 0);
  return T;
}

SitePrecision v_site_precision(const SiteSet& s) {
  SitePrecision T;
  if (s.bivariate()) {
    const auto n = static_cast<Eigen::Index>(s.v.size());
    T.diag.resize(2 * n);
    T.cross.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& tau = s.v[static_cast<std::size_t>(i)].tau;
      T.diag(i) = tau(0, 0);
      T.diag(n + i) = tau(1, 1);
      T.cross(i) = tau(0, 1);
    }
  } else {
    T.diag.resize(static_cast<Eigen::Index>(s.f.size()));
    for (std::size_t i = 0; i < s.f.size(); ++i) T.diag(static_cast<Eigen::Index>(i)) = s.f[i].tau(0, 0);
  }
  return T;
}

Vector theta_site_nu(const SiteSet& s) {
  Vector nu(static_cast<Eigen::Index>(s.theta.size()));
  for (std::size_t i = 0; i < s.theta.size(); ++i) nu(static_cast<Eigen::Index>(i)) = s.theta[i].nu(0);
  return nu;
}

Vector v_site_nu(const SiteSet& s) {
  if (s.bivariate()) {
    const auto n = static_cast<Eigen::Index>(s.v.size());
    Vector nu(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      nu(i) = s.v[static_cast<std::size_t>(i)].nu(0);
      nu(n + i) = s.v[static_cast<std::size_t>(i)].nu(1);
    }
    return nu;
  }
  Vector nu(static_cast<Eigen::Index>(s.f.size()));
  for (std::size_t i = 0; i < s.f.size(); ++i) nu(static_cast<Eigen::Index>(i)) = s.f[i].nu(0);
  return nu;
}

template <int D>
Cavity<D> compute_cavity(const Gaussian<D>& marginal, const NatParams<D>& site) {
  if (!is_pd<D>(marginal.cov)) {
    throw CavityError("marginal covariance is not positive definite");
  }
  Cavity<D> c;
  c.natural = to_natural(marginal) - site;
  if (!is_pd<D>(c.natural.tau)) {
    throw CavityError("cavity precision is not positive definite");
  }
  c.moments = to_moments(c.natural);
  return c;
}

template Cavity<1> compute_cavity<1>(const Gaussian1&, const Site1&);
template Cavity<2> compute_cavity<2>(const Gaussian2&, const Site2&);

namespace {

// Grid axis: center and scale; the cavity density enters only through the weights.
struct Axis {
  double center;
  double sd;
};

TiltedMoments<1> tilted_n_on(double y, double mf, double vf, double mt, double vt, Axis at,
                             const GridSpec& spec) {
  const QuadratureGrid g = simpson_grid(at.center, at.sd, spec);
  const std::size_t m = g.nodes.size();
  std::vector<double> logw(m), noise(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double th = g.nodes[k];
    noise[k] = std::exp(clamp_log_variance(th));
    logw[k] = std::log(g.weights[k]) + log_normal_pdf(th, mt, vt) +
              log_normal_pdf(y, mf, vf + noise[k]);
  }
  double mx = 0.0;
  const double log_z = log_sum_exp(logw, mx);
  const double inv_z = std::exp(mx - log_z);

  // f moments about the cavity mean, theta moments about the grid center
  double e1f = 0, e2f = 0, e1t = 0, e2t = 0;
  const double r = y - mf;
  for (std::size_t k = 0; k < m; ++k) {
    const double w = std::exp(logw[k] - mx) * inv_z;
    const double s = vf + noise[k];
    const double cm = vf * r / s;
    const double cv = vf * noise[k] / s;
    const double dt = g.nodes[k] - at.center;
    e1f += w * cm;
    e2f += w * (cm * cm + cv);
    e1t += w * dt;
    e2t += w * dt * dt;
  }
  TiltedMoments<1> out;
  out.log_zhat = log_z;
  out.v = gaussian1(mf + e1f, e2f - e1f * e1f);
  out.theta = gaussian1(at.center + e1t, e2t - e1t * e1t);
  if (!is_pd<1>(out.v.cov) || !is_pd<1>(out.theta.cov) || !std::isfinite(out.v.mean(0)) ||
      !std::isfinite(out.theta.mean(0))) {
    throw QuadratureError("tilted moments are not finite or not positive");
  }
  return out;
}

TiltedMoments<2> tilted_mn_on(double y, const Gaussian2& cavity_v, double mt, double vt, Axis ap, Axis at,
                              const GridSpec& spec) {
  const double mf = cavity_v.mean(0);
  const double mp = cavity_v.mean(1);
  const double sff = cavity_v.cov(0, 0);
  const double sfp = cavity_v.cov(0, 1);
  const double spp = cavity_v.cov(1, 1);
  const double c = sfp / spp;
  const double s2 = sff - sfp * c;

  const QuadratureGrid gp = simpson_grid(ap.center, ap.sd, spec);
  const QuadratureGrid gt = simpson_grid(at.center, at.sd, spec);
  const std::size_t np = gp.nodes.size();
  const std::size_t nt = gt.nodes.size();

  std::vector<double> noise(nt), log_pt(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    noise[k] = std::exp(clamp_log_variance(gt.nodes[k]));
    log_pt[k] = std::log(gt.weights[k]) + log_normal_pdf(gt.nodes[k], mt, vt);
  }
  std::vector<double> scale(np), cond_mean(np), log_pp(np);
  for (std::size_t j = 0; j < np; ++j) {
    const double ph = gp.nodes[j];
    scale[j] = std::exp(0.5 * clamp_log_variance(ph));
    cond_mean[j] = mf + c * (ph - mp);
    log_pp[j] = std::log(gp.weights[j]) + log_normal_pdf(ph, mp, spp);
  }

  // (np x nt) tensor grid, phi along rows and theta along columns
  using Col = Eigen::ArrayXd;
  const auto P = static_cast<Eigen::Index>(np);
  const auto Q = static_cast<Eigen::Index>(nt);
  const Col a = Eigen::Map<const Col>(scale.data(), P);
  const Col a2s2 = a.square() * s2;
  const Col cmean = Eigen::Map<const Col>(cond_mean.data(), P);
  const Col r = y - a * cmean;
  const Col r2 = r.square();
  const Col lpp = Eigen::Map<const Col>(log_pp.data(), P) - 0.5 * std::log(2.0 * std::numbers::pi);
  Eigen::ArrayXXd logw(P, Q);
  Eigen::ArrayXXd inv_s(P, Q);
  for (Eigen::Index k = 0; k < Q; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    inv_s.col(k) = (a2s2 + noise[ku]).inverse();
    logw.col(k) = lpp + log_pt[ku] + 0.5 * inv_s.col(k).log() - 0.5 * r2 * inv_s.col(k);
  }
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) throw QuadratureError("tilted normalizer underflowed or is not finite");
  Eigen::ArrayXXd w = (logw - mx).exp();
  const double zsum = w.sum();
  const double log_z = mx + std::log(zsum);
  w /= zsum;

  // conditional moments of f~ about the cavity mean given (phi, theta);
  // phi and theta moments about the grid centers
  const Col base = cmean - mf;
  const Col sar = s2 * a * r;
  Col wf = Col::Zero(P), wf2 = Col::Zero(P);
  Col wt(Q);
  for (Eigen::Index k = 0; k < Q; ++k) {
    const Col cm = base + sar * inv_s.col(k);
    const Col cv = (s2 * noise[static_cast<std::size_t>(k)]) * inv_s.col(k);
    wf += w.col(k) * cm;
    wf2 += w.col(k) * (cm.square() + cv);
    wt(k) = w.col(k).sum();
  }
  const Col wj = w.rowwise().sum();
  const Col dp = Eigen::Map<const Col>(gp.nodes.data(), P) - ap.center;
  const Col dt = Eigen::Map<const Col>(gt.nodes.data(), Q) - at.center;

  const double e1f = wf.sum(), e2f = wf2.sum(), efp = (wf * dp).sum();
  const double e1p = (wj * dp).sum(), e2p = (wj * dp.square()).sum();
  const double e1t = (wt * dt).sum(), e2t = (wt * dt.square()).sum();

  TiltedMoments<2> out;
  out.log_zhat = log_z;
  out.v.mean << mf + e1f, ap.center + e1p;
  out.v.cov << e2f - e1f * e1f, efp - e1f * e1p, efp - e1f * e1p, e2p - e1p * e1p;
  out.theta = gaussian1(at.center + e1t, e2t - e1t * e1t);
  if (!is_pd<2>(out.v.cov) || !is_pd<1>(out.theta.cov) || !out.v.mean.allFinite() ||
      !std::isfinite(out.theta.mean(0))) {
    throw QuadratureError("tilted moments are not finite or not positive definite");
  }
  return out;
}

}  // namespace

TiltedMoments<1> tilted_moments_n(double y, const Gaussian1& cavity_f,
                                  const Gaussian1& cavity_theta, const GridSpec& spec) {
  const double mf = cavity_f.mean(0);
  const double vf = cavity_f.cov(0, 0);
  const double mt = cavity_theta.mean(0);
  const double vt = cavity_theta.cov(0, 0);
  if (!(vf > 0.0) || !(vt > 0.0)) {
    throw CavityError("tilted_moments_n: cavity variance must be positive");
  }
  return tilted_n_on(y, mf, vf, mt, vt, {mt, std::sqrt(vt)}, spec);
}

TiltedMoments<2> tilted_moments_mn(double y, const Gaussian2& cavity_v,
                                   const Gaussian1& cavity_theta, const GridSpec& spec) {
  const double mt = cavity_theta.mean(0);
  const double vt = cavity_theta.cov(0, 0);
  if (!is_pd<2>(cavity_v.cov) || !(vt > 0.0)) {
    throw CavityError("tilted_moments_mn: cavity covariance must be positive definite");
  }
  if (std::abs(cavity_v.cov(0, 1)) / std::sqrt(cavity_v.cov(0, 0) * cavity_v.cov(1, 1)) > kMaxCorrelation) {
    throw CavityError("tilted_moments_mn: degenerate cavity correlation");
  }
  return tilted_mn_on(y, cavity_v, mt, vt, {cavity_v.mean(1), std::sqrt(cavity_v.cov(1, 1))},
                      {mt, std::sqrt(vt)}, spec);
}

JointPosterior recompute_posterior(const EPPriors& priors, const SiteSet& sites) {
  JointPosterior post;
  post.n = sites.size();
  post.bivariate = priors.bivariate;
  post.v = posterior_block(priors.v, v_site_precision(sites), v_site_nu(sites));
  post.theta = posterior_block(priors.theta, theta_site_precision(sites), theta_site_nu(sites));
  return post;
}

bool SweepMoments::ok(std::size_t i) const {
  if (!cav_theta[i]) return false;
  if (!tilted_n.empty()) return tilted_n[i].has_value();
  return tilted_mn[i].has_value();
}

SweepMoments compute_sweep_moments(const JointPosterior& post, const SiteSet& sites,
                                   const Vector& y, ModelKind kind, const GridSpec& grid) {
  const std::size_t n = sites.size();
  const bool biv = has_signal_process(kind);
  SweepMoments m;
  m.cav_theta.resize(n);
  if (biv) {
    m.cav_v.resize(n);
    m.tilted_mn.resize(n);
  } else {
    m.cav_f.resize(n);
    m.tilted_n.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    try {
      m.cav_theta[i] = compute_cavity<1>(post.theta_marginal(i), sites.theta[i]);
      if (biv) {
        m.cav_v[i] = compute_cavity<2>(post.v_marginal(i), sites.v[i]);
      } else {
        m.cav_f[i] = compute_cavity<1>(post.f_marginal(i), sites.f[i]);
      }
    } catch (const CavityError&) {
      m.cav_theta[i].reset();
      ++m.cavity_failures;
      continue;
    }
    const double yi = y(static_cast<Eigen::Index>(i));
    try {
      if (biv) {
        auto t = tilted_moments_mn(yi, m.cav_v[i]->moments, m.cav_theta[i]->moments, grid);
        if (kind == ModelKind::ep_mn_factorized) {
          t.v.cov(0, 1) = 0.0;
          t.v.cov(1, 0) = 0.0;
        }
        m.tilted_mn[i] = t;
      } else {
        m.tilted_n[i] = tilted_moments_n(yi, m.cav_f[i]->moments, m.cav_theta[i]->moments, grid);
      }
    } catch (const CavityError&) {
      ++m.cavity_failures;
    } catch (const QuadratureError&) {
      ++m.quadrature_failures;
    }
  }
  return m;
}

SiteSet update_sites_parallel(const SiteSet& sites, const SweepMoments& mom, ModelKind kind,
                              double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw InputError("damping must lie in (0, 1]");
  }
  SiteSet out = sites;
  const bool biv = has_signal_process(kind);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!mom.ok(i)) continue;
    const Gaussian1& tilted_theta = biv ? mom.tilted_mn[i]->theta : mom.tilted_n[i]->theta;
    const Site1 new_theta = to_natural(tilted_theta) - mom.cav_theta[i]->natural;
    out.theta[i] = sites.theta[i] + (new_theta - sites.theta[i]) * delta;
    if (biv) {
      const Site2 new_v = to_natural(mom.tilted_mn[i]->v) - mom.cav_v[i]->natural;
      out.v[i] = sites.v[i] + (new_v - sites.v[i]) * delta;
      if (kind == ModelKind::ep_mn_factorized) {
        out.v[i].tau(0, 1) = 0.0;
        out.v[i].tau(1, 0) = 0.0;
      }
    } else {
      const Site1 new_f = to_natural(mom.tilted_n[i]->v) - mom.cav_f[i]->natural;
      out.f[i] = sites.f[i] + (new_f - sites.f[i]) * delta;
    }
  }
  return out;
}

SiteSet update_sites_parallel(const EPState& state, const Vector& y, double delta,
                              const GridSpec& grid) {
  const SweepMoments mom = compute_sweep_moments(state.posterior, state.sites, y, state.kind, grid);
  return update_sites_parallel(state.sites, mom, state.kind, delta);
}

double log_marginal_ep(const EPPriors& priors, const JointPosterior& post, const SiteSet& sites) {
  const auto& pv = post.v;
  const auto& pt = post.theta;
  double lz = 0.5 * pv.nu_centered.dot(pv.mu - priors.v.mean) - 0.5 * pv.log_det_i_kt;
  lz += 0.5 * pt.nu_centered.dot(pt.mu - priors.theta.mean) - 0.5 * pt.log_det_i_kt;

  const std::size_t n = sites.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    try {
      Eigen::Matrix<double, 1, 1> m_theta;
      m_theta << priors.theta.mean(k);
      const Gaussian1 marg_t = post.theta_marginal(i);
      const auto cav_t = compute_cavity<1>(marg_t, sites.theta[i]);
      lz += log_partition(centered(cav_t.moments, m_theta)) -
            log_partition(centered(marg_t, m_theta));
      if (post.bivariate) {
        Eigen::Vector2d m_v(priors.v.mean(k), priors.v.mean(k + static_cast<Eigen::Index>(n)));
        const Gaussian2 marg_v = post.v_marginal(i);
        const auto cav_v = compute_cavity<2>(marg_v, sites.v[i]);
        lz += log_partition(centered(cav_v.moments, m_v)) - log_partition(centered(marg_v, m_v));
      } else {
        Eigen::Matrix<double, 1, 1> m_f;
        m_f << priors.v.mean(k);
        const Gaussian1 marg_f = post.f_marginal(i);
        const auto cav_f = compute_cavity<1>(marg_f, sites.f[i]);
        lz += log_partition(centered(cav_f.moments, m_f)) - log_partition(centered(marg_f, m_f));
      }
    } catch (const CavityError&) {
      return kNaN;
    }
    lz += sites.log_zhat[i];
  }
  return lz;
}

namespace {

// Largest site change, per site relative to the scale of the posterior marginal's
// natural parameters (a site change moves the marginal by about this fraction).
double site_drift(const SiteSet& a, const SiteSet& b, const JointPosterior& post) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, (a.theta[i] - b.theta[i]).max_abs() /
                        std::max(1.0, to_natural(post.theta_marginal(i)).max_abs()));
    if (a.bivariate()) {
      d = std::max(d, (a.v[i] - b.v[i]).max_abs() /
                          std::max(1.0, to_natural(post.v_marginal(i)).max_abs()));
    } else {
      d = std::max(d, (a.f[i] - b.f[i]).max_abs() /
                          std::max(1.0, to_natural(post.f_marginal(i)).max_abs()));
    }
  }
  return d;
}

}  // namespace

EPState run_ep(const Matrix& X, const Vector& y, const EPPriors& priors, ModelKind kind,
               const EPConfig& cfg, const SiteSet* warm_start) {
  if (!is_ep(kind)) throw InputError("run_ep: not an EP model kind");
  if (X.rows() != y.size() || y.size() == 0) {
    throw InputError("run_ep: X and y must have the same non-zero number of rows");
  }
  if (priors.bivariate != has_signal_process(kind)) {
    throw InputError("run_ep: priors do not match the model kind");
  }
  const auto n = static_cast<std::size_t>(y.size());

  EPState st;
  st.kind = kind;
  st.sites = SiteSet::zeros(n, priors.bivariate);
  bool warm = false;
  if (warm_start != nullptr && warm_start->size() == n &&
      warm_start->bivariate() == priors.bivariate) {
    try {
      st.posterior = recompute_posterior(priors, *warm_start);
      st.sites = *warm_start;
      warm = true;
    } catch (const NumericalError&) {
    }
  }
  if (!warm) st.posterior = recompute_posterior(priors, st.sites);

  double drift = std::numeric_limits<double>::infinity();
  double damping = cfg.damping;
  double mark = drift;
  int stalled = 0;
  for (int it = 0;; ++it) {
    const SweepMoments mom = compute_sweep_moments(st.posterior, st.sites, y, kind, cfg.grid);
    bool all_ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (mom.ok(i)) {
        st.sites.log_zhat[i] =
            priors.bivariate ? mom.tilted_mn[i]->log_zhat : mom.tilted_n[i]->log_zhat;
      } else {
        all_ok = false;
      }
    }
    st.skipped_last_sweep = mom.cavity_failures + mom.quadrature_failures;
    st.skipped_total += st.skipped_last_sweep;
    st.log_z_ep = all_ok ? log_marginal_ep(priors, st.posterior, st.sites) : kNaN;
    st.log_z_history.push_back(st.log_z_ep);

    if (it > 0 && all_ok && std::isfinite(st.log_z_ep)) {
      const double prev = st.log_z_history[st.log_z_history.size() - 2];
      if (std::abs(st.log_z_ep - prev) < cfg.tol && drift < cfg.site_tol) {
        st.converged = true;
        break;
      }
    }
    if (it >= cfg.max_iter) break;

    if (drift < 0.5 * mark) {
      mark = drift;
      stalled = 0;
    } else if (++stalled >= cfg.stall_window) {
      damping = std::max(0.5 * damping, cfg.min_damping);
      mark = drift;
      stalled = 0;
    }
    double delta = damping;
    if (mom.cavity_failures > cfg.cavity_failure_fraction * static_cast<double>(n)) {
      delta = std::max(0.5 * delta, cfg.min_damping);
    }
    for (;;) {
      SiteSet next = update_sites_parallel(st.sites, mom, kind, delta);
      try {
        JointPosterior post = recompute_posterior(priors, next);
        drift = site_drift(next, st.sites, post);
        st.sites = std::move(next);
        st.posterior = std::move(post);
        break;
      } catch (const NumericalError&) {
        delta *= 0.5;
        if (delta < cfg.min_damping) throw;
      }
    }
    ++st.iterations;
  }
  return st;
}

EPState run_ep(const Matrix& X, const Vector& y, const HyperParams& hp, ModelKind kind,
               const EPConfig& config, const SiteSet* warm_start) {
  return run_ep(X, y, build_priors(X, kind, hp), kind, config, warm_start);
}

}  // namespace hetgp
