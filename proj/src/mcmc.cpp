#include "hetgp/mcmc.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "hetgp/errors.hpp"
#include "hetgp/predict.hpp"

namespace hetgp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxShrinks = 500;

double log_lik_point(double y, double mean, double theta) {
  const double r = y - mean;
  return -0.5 * (std::log(kTwoPi) + theta + r * r * std::exp(-theta));
}

// One elliptical slice update of x ~ N(mean, K) given a prior draw nu ~ N(0, K).
// Returns the number of bracket shrinkages.
template <class LogLik>
int ess_update(Vector& x, double& ll, const Vector& mean, const Vector& nu, LogLik&& loglik,
               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_u = ll + std::log(unif(rng));
  double angle = kTwoPi * unif(rng);
  double lo = angle - kTwoPi, hi = angle;
  const Vector x0 = x - mean;
  for (int shrinks = 0; shrinks < kMaxShrinks; ++shrinks) {
    Vector prop = mean + x0 * std::cos(angle) + nu * std::sin(angle);
    const double l = loglik(prop);
    if (l > log_u) {
      x = std::move(prop);
      ll = l;
      return shrinks;
    }
    if (angle < 0.0) {
      lo = angle;
    } else {
      hi = angle;
    }
    angle = lo + (hi - lo) * unif(rng);
  }
  // the bracket has collapsed onto the current state, which is on the slice
  return kMaxShrinks;
}

Vector prior_draw(const LatentPrior& prior, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector nu(prior.size());
  Eigen::Index o = 0;
  for (const auto& L : prior.chol_blocks) {
    Vector z(L.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    nu.segment(o, L.rows()) = L.triangularView<Eigen::Lower>() * z;
    o += L.rows();
  }
  return nu;
}

double gauss_log_pdf(double x, double m, double v) {
  const double d = x - m;
  return -0.5 * (std::log(kTwoPi * v) + d * d / v);
}

double log_sum_exp(const Eigen::Ref<const Vector>& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

// Gauss-Hermite rule for weight exp(-x^2) (Golub-Welsch).
struct GaussHermite {
  Vector nodes, weights;
  explicit GaussHermite(int k) {
    Matrix J = Matrix::Zero(k, k);
    for (int i = 1; i < k; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(0.5 * i);
    Eigen::SelfAdjointEigenSolver<Matrix> es(J);
    nodes = es.eigenvalues();
    weights = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square();
  }
};

}  // namespace

double latent_log_likelihood(const Vector& y, ModelKind kind, const Vector& v, const Vector& theta) {
  const Eigen::Index n = y.size();
  double ll = 0.0;
  if (has_signal_process(kind)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      ll += log_lik_point(y(i), std::exp(0.5 * v(n + i)) * v(i), theta(i));
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) ll += log_lik_point(y(i), v(i), theta(i));
  }
  return std::isnan(ll) ? -std::numeric_limits<double>::infinity() : ll;
}

ChainOutput ess_sample(const Matrix& X, const Vector& y, ModelKind kind, const HyperParams& hp,
                       const ChainConfig& cfg) {
  if (!is_ep(kind)) throw InputError("ess_sample: needs a latent-variance model kind");
  if (X.rows() != y.size() || y.size() == 0) {
    throw InputError("ess_sample: X and y must have the same non-zero number of rows");
  }
  if (cfg.n_samples <= 0 || cfg.n_burnin < 0 || cfg.thinning <= 0) {
    throw InputError("ess_sample: need n_samples > 0, n_burnin >= 0, thinning > 0");
  }
  const EPPriors priors = build_priors(X, kind, hp);
  const auto n = static_cast<std::size_t>(y.size());

  Vector v = priors.v.mean;
  Vector theta = priors.theta.mean;
  auto loglik = [&](const Vector& vv, const Vector& tt) {
    return cfg.constant_likelihood ? 0.0 : latent_log_likelihood(y, kind, vv, tt);
  };
  double ll = loglik(v, theta);
  if (!std::isfinite(ll)) {
    throw InitializationError("ess_sample: log likelihood at the prior mean is not finite");
  }

  ChainOutput out;
  out.kind = kind;
  out.n = n;
  const int kept = cfg.n_samples / cfg.thinning;
  out.v.resize(kept, priors.v.size());
  out.theta.resize(kept, priors.theta.size());

  std::mt19937_64 rng(cfg.seed);
  long shrinks_v = 0, shrinks_t = 0, updates = 0;
  int stored = 0;
  const int total = cfg.n_burnin + cfg.n_samples;
  for (int it = 0; it < total; ++it) {
    if (cfg.sample_v) {
      const Vector nu = prior_draw(priors.v, rng);
      shrinks_v += ess_update(v, ll, priors.v.mean, nu,
                              [&](const Vector& prop) { return loglik(prop, theta); }, rng);
    }
    if (cfg.sample_theta) {
      const Vector nu = prior_draw(priors.theta, rng);
      shrinks_t += ess_update(theta, ll, priors.theta.mean, nu,
                              [&](const Vector& prop) { return loglik(v, prop); }, rng);
    }
    ++updates;
    const int post = it - cfg.n_burnin;
    if (post >= 0 && (post + 1) % cfg.thinning == 0 && stored < kept) {
      out.v.row(stored) = v.transpose();
      out.theta.row(stored) = theta.transpose();
      ++stored;
    }
  }
  out.mean_shrinks_v = static_cast<double>(shrinks_v) / static_cast<double>(updates);
  out.mean_shrinks_theta = static_cast<double>(shrinks_t) / static_cast<double>(updates);
  if (!out.v.allFinite() || !out.theta.allFinite()) {
    throw NumericalError("ess_sample: non-finite draw");
  }

  out.ess_v.resize(out.v.cols());
  for (Eigen::Index j = 0; j < out.v.cols(); ++j) out.ess_v(j) = effective_sample_size(out.v.col(j));
  out.ess_theta.resize(out.theta.cols());
  for (Eigen::Index j = 0; j < out.theta.cols(); ++j) {
    out.ess_theta(j) = effective_sample_size(out.theta.col(j));
  }
  return out;
}

double effective_sample_size(const Vector& draws) {
  const Eigen::Index N = draws.size();
  if (N < 4) return static_cast<double>(N);
  const Vector c = draws.array() - draws.mean();
  if (c.squaredNorm() == 0.0) return static_cast<double>(N);

  // autocovariance by zero-padded FFT
  Eigen::Index L = 1;
  while (L < 2 * N) L <<= 1;
  std::vector<double> buf(static_cast<std::size_t>(L), 0.0);
  for (Eigen::Index i = 0; i < N; ++i) buf[static_cast<std::size_t>(i)] = c(i);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);
  for (auto& z : spec) z = std::complex<double>(std::norm(z), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spec);
  const double c0 = acov[0];

  // Geyer's initial monotone sequence over pair sums
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 < N; ++k) {
    double gamma = (acov[static_cast<std::size_t>(2 * k)] + acov[static_cast<std::size_t>(2 * k + 1)]) / c0;
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    tau += 2.0 * gamma;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(N)));
  return static_cast<double>(N) / tau;
}

double split_rhat(const std::vector<Vector>& chains) {
  std::vector<Vector> halves;
  for (const auto& c : chains) {
    const Eigen::Index h = c.size() / 2;
    if (h < 2) throw InputError("split_rhat: chains need at least 4 draws");
    halves.emplace_back(c.head(h));
    halves.emplace_back(c.segment(c.size() - h, h));
  }
  const auto m = static_cast<double>(halves.size());
  const auto len = static_cast<double>(halves.front().size());
  Vector means(static_cast<Eigen::Index>(halves.size()));
  double W = 0.0;
  for (std::size_t i = 0; i < halves.size(); ++i) {
    const Vector& c = halves[i];
    if (static_cast<double>(c.size()) != len) throw InputError("split_rhat: unequal chain lengths");
    means(static_cast<Eigen::Index>(i)) = c.mean();
    W += (c.array() - c.mean()).square().sum() / (len - 1.0);
  }
  W /= m;
  const double B = len * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double var_plus = (len - 1.0) / len * W + B / len;
  return W > 0.0 ? std::sqrt(var_plus / W) : 1.0;
}

DiscrepancyReport compare_to_ep(const ChainOutput& chain, const EPState& state) {
  const JointPosterior& post = state.posterior;
  if (chain.v.cols() != post.v.mu.size() || chain.theta.cols() != post.theta.mu.size()) {
    throw InputError("compare_to_ep: chain and EP state have different latent dimensions");
  }
  const Eigen::Index nv = chain.v.cols();
  const Eigen::Index nt = chain.theta.cols();
  DiscrepancyReport r;
  r.mean_z.resize(nv + nt);
  r.sd_ratio.resize(nv + nt);
  r.ess.resize(nv + nt);
  auto fill = [&](Eigen::Index at, const Matrix& draws, Eigen::Index j, double mu_ep, double var_ep,
                  double ess) {
    const Vector col = draws.col(j);
    const double mu = col.mean();
    const double sd = std::sqrt((col.array() - mu).square().sum() / static_cast<double>(col.size() - 1));
    r.mean_z(at) = std::abs(mu_ep - mu) / sd;
    r.sd_ratio(at) = std::sqrt(var_ep) / sd;
    r.ess(at) = ess;
  };
  for (Eigen::Index j = 0; j < nv; ++j) {
    fill(j, chain.v, j, post.v.mu(j), post.v.var(j), chain.ess_v(j));
  }
  for (Eigen::Index j = 0; j < nt; ++j) {
    fill(nv + j, chain.theta, j, post.theta.mu(j), post.theta.var(j), chain.ess_theta(j));
  }
  r.max_mean_z = r.mean_z.maxCoeff();
  r.min_sd_ratio = r.sd_ratio.minCoeff();
  r.max_sd_ratio = r.sd_ratio.maxCoeff();
  r.min_ess = r.ess.minCoeff();
  r.reliable = r.min_ess >= 100.0;
  return r;
}

double McPredictive::log_density(Eigen::Index j, double y_star) const {
  const Eigen::Index D = draw_mean.rows();
  Vector lp(D);
  for (Eigen::Index d = 0; d < D; ++d) lp(d) = gauss_log_pdf(y_star, draw_mean(d, j), draw_var(d, j));
  return log_sum_exp(lp) - std::log(static_cast<double>(D));
}

double McPredictive::expected_log_density(Eigen::Index j, double true_mean, double true_sd) const {
  if (true_sd <= 0.0) return log_density(j, true_mean);
  static const GaussHermite gh(80);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < gh.nodes.size(); ++k) {
    acc += gh.weights(k) * log_density(j, true_mean + std::sqrt(2.0) * true_sd * gh.nodes(k));
  }
  return acc / std::sqrt(std::numbers::pi);
}

McPredictive mc_predictive(const ChainOutput& chain, const Matrix& X, const HyperParams& hp,
                           const Matrix& Xs, std::size_t max_draws) {
  if (chain.draws() == 0) throw InputError("mc_predictive: empty chain");
  if (static_cast<std::size_t>(X.rows()) != chain.n || X.cols() != Xs.cols()) {
    throw InputError("mc_predictive: input shapes do not match the chain");
  }
  const EPPriors priors = build_priors(X, chain.kind, hp);
  const Eigen::Index n = X.rows();
  const Eigen::Index m = Xs.rows();
  const bool biv = has_signal_process(chain.kind);

  // conditional projection of one process: mean weights A = K^-1 K*, variance c
  struct Projection {
    Matrix A;
    Vector c;
    double mean = 0.0;
  };
  auto project = [&](const LatentPrior& prior, std::size_t b, const KernelParams& kp) {
    Projection p;
    const Matrix Ks = cross_cov(X, Xs, kp);
    const auto L = prior.chol_blocks[b].triangularView<Eigen::Lower>();
    p.A = L.transpose().solve(L.solve(Ks));
    p.c = (kp.magnitude() - (Ks.array() * p.A.array()).colwise().sum()).transpose().cwiseMax(0.0);
    p.mean = kp.constant_mean;
    return p;
  };
  const Projection pf = project(priors.v, 0, hp.f);
  const Projection pt = project(priors.theta, 0, hp.theta);
  std::optional<Projection> pp;
  if (biv) pp = project(priors.v, 1, hp.phi);

  const std::size_t total = chain.draws();
  const std::size_t D = std::min(total, std::max<std::size_t>(max_draws, 1));
  McPredictive out;
  out.draw_mean.resize(static_cast<Eigen::Index>(D), m);
  out.draw_var.resize(static_cast<Eigen::Index>(D), m);
  for (std::size_t d = 0; d < D; ++d) {
    const auto row = static_cast<Eigen::Index>(d * total / D);
    const Vector v = chain.v.row(row).transpose();
    const Vector th = chain.theta.row(row).transpose();
    const Vector mt = pt.mean + (pt.A.transpose() * (th.array() - pt.mean).matrix()).array();
    const Vector mf = pf.mean + (pf.A.transpose() * (v.head(n).array() - pf.mean).matrix()).array();
    Vector mp;
    if (biv) mp = pp->mean + (pp->A.transpose() * (v.tail(n).array() - pp->mean).matrix()).array();
    for (Eigen::Index j = 0; j < m; ++j) {
      LatentPoint lat;
      lat.mean_f = mf(j);
      lat.var_f = pf.c(j);
      lat.mean_theta = mt(j);
      lat.var_theta = pt.c(j);
      PredictiveResult r;
      if (biv) {
        lat.has_phi = true;
        lat.mean_phi = mp(j);
        lat.var_phi = pp->c(j);
        r = predictive_y_mn(lat);
      } else {
        r = predictive_y_n(lat);
      }
      out.draw_mean(static_cast<Eigen::Index>(d), j) = r.mean_y;
      out.draw_var(static_cast<Eigen::Index>(d), j) = r.var_y;
    }
  }
  out.moments.resize(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    const double mean = out.draw_mean.col(j).mean();
    const double second = (out.draw_var.col(j).array() + out.draw_mean.col(j).array().square()).mean();
    out.moments[static_cast<std::size_t>(j)].mean_y = mean;
    out.moments[static_cast<std::size_t>(j)].var_y = second - mean * mean;
  }
  return out;
}

}  // namespace hetgp
