#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "hetgp/datasets.hpp"
#include "hetgp/errors.hpp"
#include "hetgp/ep.hpp"
#include "hetgp/model_select.hpp"
#include "oracles.hpp"

using namespace hetgp;

namespace {

// Self-normalized importance sampling from the cavity, with delta-method standard errors.
struct WeightedStats {
  double sw = 0.0;
  std::vector<double> w;
  std::vector<std::vector<double>> x;  // one row per statistic

  void add(double weight, std::vector<double> values) {
    w.push_back(weight);
    sw += weight;
    if (x.empty()) x.resize(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) x[k].push_back(values[k]);
  }
  double mean(std::size_t k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[k][i];
    return s / sw;
  }
  double se(std::size_t k) const {
    const double m = mean(k);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * w[i] * (x[k][i] - m) * (x[k][i] - m);
    return std::sqrt(s) / sw;
  }
};

Dataset small_sim1(std::size_t n, std::uint64_t seed) { return generate_sim1(n, seed, 10).train; }

HyperParams sim_params(ModelKind kind) {
  HyperParams hp;
  hp.f.log_magnitude = has_signal_process(kind) ? 0.0 : std::log(0.3);
  hp.f.log_lengthscales = {0.3};
  hp.theta.log_magnitude = 0.5;
  hp.theta.log_lengthscales = {1.2};
  hp.theta.constant_mean = -3.0;
  hp.phi.log_magnitude = 0.0;
  hp.phi.log_lengthscales = {1.0};
  hp.phi.constant_mean = -1.5;
  return hp;
}

}  // namespace

TEST_CASE("cavity of a 2x2 marginal matches explicit inversion") {
  Gaussian2 marg;
  marg.mean << 0.4, -1.1;
  marg.cov << 0.5, 0.1, 0.1, 0.3;
  Site2 site;
  site.tau << 0.7, 0.2, 0.2, 1.1;
  site.nu << 0.3, -0.2;
  const auto cav = compute_cavity<2>(marg, site);
  const double det = 0.5 * 0.3 - 0.1 * 0.1;
  Eigen::Matrix2d P;
  P << 0.3 / det, -0.1 / det, -0.1 / det, 0.5 / det;
  const Eigen::Matrix2d tau = P - site.tau;
  const Eigen::Vector2d nu = P * marg.mean - site.nu;
  CHECK((cav.natural.tau - tau).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cav.natural.nu - nu).cwiseAbs().maxCoeff() < 1e-12);
  const double dt = tau.determinant();
  Eigen::Matrix2d S;
  S << tau(1, 1) / dt, -tau(0, 1) / dt, -tau(1, 0) / dt, tau(0, 0) / dt;
  CHECK((cav.moments.cov - S).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cav.moments.mean - S * nu).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cavity with a site more precise than the marginal is rejected") {
  const Gaussian1 marg = gaussian1(0.0, 0.5);  // precision 2
  Site1 site;
  site.tau(0, 0) = 2.5;
  CHECK_THROWS_AS(compute_cavity<1>(marg, site), CavityError);
  Gaussian2 m2;
  m2.cov << 1.0, 0.0, 0.0, 1.0;
  Site2 s2;
  s2.tau << 0.5, 0.9, 0.9, 0.5;  // cavity precision indefinite
  CHECK_THROWS_AS(compute_cavity<2>(m2, s2), CavityError);
}

TEST_CASE("cavity times site reconstructs the marginal") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    Gaussian2 marg;
    marg.mean << u(rng), u(rng);
    const double a = 0.5 + 0.4 * u(rng), b = 0.7 + 0.3 * u(rng), c = 0.2 * u(rng);
    marg.cov << a, c, c, b;
    Site2 site;
    const double p = 0.3 + 0.2 * u(rng), q = 0.4 + 0.2 * u(rng), r = 0.1 * u(rng);
    site.tau << p, r, r, q;
    site.nu << u(rng), u(rng);
    const auto cav = compute_cavity<2>(marg, site);
    const Site2 recon = to_natural(cav.moments) + site;
    const Site2 target = to_natural(marg);
    CHECK((recon - target).max_abs() < 1e-12);

    const Gaussian1 m1 = gaussian1(u(rng), 0.6 + 0.3 * u(rng));
    Site1 s1;
    s1.tau(0, 0) = 0.5 + 0.3 * u(rng);
    s1.nu(0) = u(rng);
    const auto c1 = compute_cavity<1>(m1, s1);
    CHECK((to_natural(c1.moments) + s1 - to_natural(m1)).max_abs() < 1e-12);
  }
}

TEST_CASE("tilted moments of the noise tier match a Monte Carlo oracle") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  const Gaussian1 cf = gaussian1(0.3, 0.7);
  const Gaussian1 ct = gaussian1(-1.0, 0.8);
  for (double y : {-0.8, 0.4, 2.2}) {
    const auto t = tilted_moments_n(y, cf, ct);
    WeightedStats st;
    const int N = 400000;
    for (int i = 0; i < N; ++i) {
      const double f = 0.3 + std::sqrt(0.7) * z(rng);
      const double th = -1.0 + std::sqrt(0.8) * z(rng);
      st.add(std::exp(log_normal_pdf(y, f, std::exp(th))), {f, f * f, th, th * th});
    }
    const double ef = st.mean(0), et = st.mean(2);
    CHECK(std::abs(t.v.mean(0) - ef) < 4.0 * st.se(0));
    CHECK(std::abs(t.theta.mean(0) - et) < 4.0 * st.se(2));
    CHECK(std::abs(t.v.cov(0, 0) + ef * ef - st.mean(1)) < 4.0 * st.se(1) + 1e-3);
    CHECK(std::abs(t.theta.cov(0, 0) + et * et - st.mean(3)) < 4.0 * st.se(3) + 1e-3);
    CHECK(t.log_zhat == doctest::Approx(std::log(st.sw / N)).epsilon(0.01));
  }
}

TEST_CASE("tilted moments of the signal-and-noise tier match a Monte Carlo oracle") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  Gaussian2 cv;
  cv.mean << 0.5, -0.6;
  cv.cov << 0.8, 0.25, 0.25, 0.6;
  const Eigen::Matrix2d L = cv.cov.llt().matrixL();
  const Gaussian1 ct = gaussian1(-1.5, 0.5);
  for (double y : {-1.0, 0.3, 1.7}) {
    const auto t = tilted_moments_mn(y, cv, ct);
    WeightedStats st;
    const int N = 400000;
    for (int i = 0; i < N; ++i) {
      const Eigen::Vector2d v = cv.mean + L * Eigen::Vector2d(z(rng), z(rng));
      const double th = -1.5 + std::sqrt(0.5) * z(rng);
      const double w = std::exp(log_normal_pdf(y, std::exp(0.5 * v(1)) * v(0), std::exp(th)));
      st.add(w, {v(0), v(1), th, v(0) * v(0), v(1) * v(1), v(0) * v(1)});
    }
    CHECK(std::abs(t.v.mean(0) - st.mean(0)) < 4.0 * st.se(0));
    CHECK(std::abs(t.v.mean(1) - st.mean(1)) < 4.0 * st.se(1));
    CHECK(std::abs(t.theta.mean(0) - st.mean(2)) < 4.0 * st.se(2));
    CHECK(std::abs(t.v.cov(0, 0) + st.mean(0) * st.mean(0) - st.mean(3)) < 4.0 * st.se(3) + 1e-3);
    CHECK(std::abs(t.v.cov(1, 1) + st.mean(1) * st.mean(1) - st.mean(4)) < 4.0 * st.se(4) + 1e-3);
    CHECK(std::abs(t.v.cov(0, 1) + st.mean(0) * st.mean(1) - st.mean(5)) < 4.0 * st.se(5) + 1e-3);
    CHECK(t.log_zhat == doctest::Approx(std::log(st.sw / N)).epsilon(0.01));
  }
}

TEST_CASE("posterior recomputation matches dense inversion") {
  const Dataset d = small_sim1(25, 2);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 2.0), s(-1.0, 1.0);
  for (ModelKind kind : {ModelKind::ep_n, ModelKind::ep_mn}) {
    const EPPriors priors = build_priors(d.X, kind, sim_params(kind));
    SiteSet sites = SiteSet::zeros(25, has_signal_process(kind));
    for (std::size_t i = 0; i < 25; ++i) {
      sites.theta[i].tau(0, 0) = u(rng);
      sites.theta[i].nu(0) = s(rng);
      if (sites.bivariate()) {
        const double a = u(rng), b = u(rng), c = 0.5 * std::sqrt(a * b) * s(rng);
        sites.v[i].tau << a, c, c, b;
        sites.v[i].nu << s(rng), s(rng);
      } else {
        sites.f[i].tau(0, 0) = u(rng);
        sites.f[i].nu(0) = s(rng);
      }
    }
    const JointPosterior post = recompute_posterior(priors, sites);
    const oracle::DensePosterior dv(priors.v, v_site_precision(sites).dense(), v_site_nu(sites));
    const oracle::DensePosterior dt(priors.theta, theta_site_precision(sites).dense(), theta_site_nu(sites));
    CHECK((post.v.covariance() - dv.Sigma).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.v.mu - dv.mu).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.v.var - dv.Sigma.diagonal()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(post.v.log_det_i_kt == doctest::Approx(dv.log_det_i_kt).epsilon(1e-8));
    CHECK((post.theta.mu - dt.mu).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.theta.var - dt.Sigma.diagonal()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(post.theta.log_det_i_kt == doctest::Approx(dt.log_det_i_kt).epsilon(1e-8));
    if (post.bivariate) {
      for (Eigen::Index i = 0; i < 25; ++i) CHECK(std::abs(post.v.cross(i) - dv.Sigma(i, 25 + i)) < 1e-8);
    }
  }
}

TEST_CASE("EP converges on sim1 data and warm starts resume at the fixed point") {
  const Dataset d = small_sim1(60, 4);
  for (ModelKind kind : {ModelKind::ep_n, ModelKind::ep_mn}) {
    const HyperParams hp = sim_params(kind);
    const EPState st = run_ep(d.X, d.y, hp, kind);
    CHECK(st.converged);
    CHECK(st.iterations < 50);
    CHECK(std::isfinite(st.log_z_ep));
    const EPState again = run_ep(d.X, d.y, hp, kind, {}, &st.sites);
    CHECK(again.converged);
    CHECK(again.iterations <= 3);
    CHECK(again.log_z_ep == doctest::Approx(st.log_z_ep).epsilon(1e-6));
  }
}

TEST_CASE("log Z_EP is invariant to the order of the observations") {
  const Dataset d = small_sim1(40, 8);
  std::vector<Eigen::Index> perm(40);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Dataset p = d.subset(perm);
  EPConfig cfg;
  cfg.tol = 1e-12;
  cfg.site_tol = 1e-10;
  cfg.max_iter = 500;
  for (ModelKind kind : {ModelKind::ep_n, ModelKind::ep_mn}) {
    const HyperParams hp = sim_params(kind);
    const EPState a = run_ep(d.X, d.y, hp, kind, cfg);
    const EPState b = run_ep(p.X, p.y, hp, kind, cfg);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(std::abs(a.log_z_ep - b.log_z_ep) < 1e-8);
  }
}

TEST_CASE("EP(n) with a nearly constant noise process reproduces the exact GP evidence") {
  const Dataset d = small_sim1(50, 3);
  HyperParams hp;
  hp.f.log_magnitude = std::log(0.3);
  hp.f.log_lengthscales = {0.4};
  hp.theta.log_magnitude = std::log(1e-10);
  hp.theta.constant_mean = std::log(0.02);
  const EPState st = run_ep(d.X, d.y, hp, ModelKind::ep_n);
  const ExactGPModel gp(d.X, d.y, hp.f, std::log(0.02));
  REQUIRE(st.converged);
  CHECK(st.log_z_ep == doctest::Approx(gp.log_marginal()).epsilon(1e-4));
}

TEST_CASE("factorized mode keeps the (f~, phi) sites uncoupled") {
  const Dataset d = small_sim1(40, 5);
  const EPState st = run_ep(d.X, d.y, sim_params(ModelKind::ep_mn), ModelKind::ep_mn_factorized);
  for (const auto& s : st.sites.v) CHECK(s.tau(0, 1) == 0.0);
}

TEST_CASE("EP input validation") {
  const Dataset d = small_sim1(10, 1);
  CHECK_THROWS_AS(build_priors(d.X, ModelKind::gp, {}), InputError);
  CHECK_THROWS_AS(run_ep(d.X, d.y.head(5), sim_params(ModelKind::ep_n), ModelKind::ep_n), InputError);
  EPState st = run_ep(d.X, d.y, sim_params(ModelKind::ep_n), ModelKind::ep_n);
  CHECK_THROWS_AS(update_sites_parallel(st, d.y, 0.0), InputError);
  CHECK_THROWS_AS(update_sites_parallel(st, d.y, 1.5), InputError);
}

TEST_CASE("stalled undamped EP(m+n) recovers by lowering the damping") {
  const SimPair d = generate_sim2(30, 0, 10);
  HyperParams hp;
  hp.f.log_lengthscales = {0.5};
  hp.phi.log_magnitude = 3.0;
  hp.phi.log_lengthscales = {2.1};
  hp.phi.constant_mean = -1.1;
  hp.theta.log_magnitude = 0.27;
  hp.theta.log_lengthscales = {1.1};
  hp.theta.constant_mean = -0.23;
  EPConfig fixed;
  fixed.damping = 1.0;
  fixed.stall_window = 1 << 30;
  CHECK_FALSE(run_ep(d.train.X, d.train.y, hp, ModelKind::ep_mn, fixed).converged);
  EPConfig adaptive;
  adaptive.damping = 1.0;
  const EPState a = run_ep(d.train.X, d.train.y, hp, ModelKind::ep_mn, adaptive);
  const EPState ref = run_ep(d.train.X, d.train.y, hp, ModelKind::ep_mn);
  REQUIRE(a.converged);
  REQUIRE(ref.converged);
  CHECK(a.log_z_ep == doctest::Approx(ref.log_z_ep).epsilon(1e-8));
  CHECK((a.posterior.v.mu - ref.posterior.v.mu).cwiseAbs().maxCoeff() < 1e-4);
}
