#include <doctest.h>

#include <cmath>
#include <random>

#include "hetgp/datasets.hpp"
#include "hetgp/gp_exact.hpp"
#include "hetgp/predict.hpp"
#include "oracles.hpp"

using namespace hetgp;

namespace {

HyperParams params(ModelKind kind) {
  HyperParams hp;
  hp.f.log_magnitude = has_signal_process(kind) ? 0.0 : std::log(0.3);
  hp.f.log_lengthscales = {0.3};
  hp.theta.log_magnitude = 0.5;
  hp.theta.log_lengthscales = {1.2};
  hp.theta.constant_mean = -3.0;
  hp.phi.log_magnitude = -0.5;
  hp.phi.log_lengthscales = {1.0};
  hp.phi.constant_mean = -1.5;
  return hp;
}

// Gaussian conditioning of the block prior on the dense EP posterior.
struct DensePredict {
  Vector mean;
  Vector var;
  DensePredict(const LatentPrior& prior, const LatentPosterior& post, const Matrix& Ks, double m0,
               Eigen::Index block, double kss) {
    const Matrix K = prior.K();
    const Matrix Kinv = K.inverse();
    const Eigen::Index n = Ks.rows();
    Matrix KsFull = Matrix::Zero(K.rows(), Ks.cols());
    KsFull.middleRows(block * n, n) = Ks;
    const Matrix A = Kinv * KsFull;
    const Matrix S = post.covariance();
    mean = Vector::Constant(Ks.cols(), m0) + A.transpose() * (post.mu - prior.mean);
    var = (Vector::Constant(Ks.cols(), kss) - (A.array() * KsFull.array()).colwise().sum().transpose().matrix() +
           (A.array() * (S * A).array()).colwise().sum().transpose().matrix());
  }
};

}  // namespace

TEST_CASE("latent predictive matches dense Gaussian conditioning") {
  const Dataset d = generate_sim1(40, 3, 10).train;
  const Matrix Xs = oracle::grid_inputs(15, -9, 9);
  for (ModelKind kind : {ModelKind::ep_n, ModelKind::ep_mn}) {
    const HyperParams hp = params(kind);
    const EPState st = run_ep(d.X, d.y, hp, kind);
    REQUIRE(st.converged);
    const EPPriors priors = build_priors(d.X, kind, hp);
    const LatentPredictive lat = latent_predictive(st, hp, d.X, Xs);
    const DensePredict f(priors.v, st.posterior.v, cross_cov(d.X, Xs, hp.f), hp.f.constant_mean, 0,
                         hp.f.magnitude());
    const DensePredict t(priors.theta, st.posterior.theta, cross_cov(d.X, Xs, hp.theta),
                         hp.theta.constant_mean, 0, hp.theta.magnitude());
    for (Eigen::Index j = 0; j < Xs.rows(); ++j) {
      const LatentPoint& p = lat[static_cast<std::size_t>(j)];
      CHECK(p.mean_f == doctest::Approx(f.mean(j)).epsilon(1e-7));
      CHECK(p.var_f == doctest::Approx(f.var(j)).epsilon(1e-6));
      CHECK(p.mean_theta == doctest::Approx(t.mean(j)).epsilon(1e-7));
      CHECK(p.var_theta == doctest::Approx(t.var(j)).epsilon(1e-6));
    }
    if (has_signal_process(kind)) {
      const DensePredict ph(priors.v, st.posterior.v, cross_cov(d.X, Xs, hp.phi),
                            hp.phi.constant_mean, 1, hp.phi.magnitude());
      const Matrix K = priors.v.K();
      const Matrix Kinv = K.inverse();
      const Eigen::Index n = d.X.rows();
      Matrix Kf = Matrix::Zero(2 * n, Xs.rows()), Kp = Matrix::Zero(2 * n, Xs.rows());
      Kf.topRows(n) = cross_cov(d.X, Xs, hp.f);
      Kp.bottomRows(n) = cross_cov(d.X, Xs, hp.phi);
      const Matrix S = st.posterior.v.covariance();
      const Matrix Af = Kinv * Kf, Ap = Kinv * Kp;
      for (Eigen::Index j = 0; j < Xs.rows(); ++j) {
        const LatentPoint& p = lat[static_cast<std::size_t>(j)];
        CHECK(p.has_phi);
        CHECK(p.mean_phi == doctest::Approx(ph.mean(j)).epsilon(1e-7));
        CHECK(p.var_phi == doctest::Approx(ph.var(j)).epsilon(1e-6));
        const double cov = Af.col(j).dot(S * Ap.col(j));  // prior cross-covariance is zero
        CHECK(std::abs(p.cov_fphi * 1.0 - cov * p.cross_shrink) < 1e-7);
      }
    }
  }
}

TEST_CASE("predictive_y_n moments") {
  LatentPoint p;
  p.mean_f = 0.7;
  p.var_f = 0.2;
  p.mean_theta = -1.0;
  p.var_theta = 0.4;
  const auto r = predictive_y_n(p);
  CHECK(r.mean_y == 0.7);
  CHECK(r.var_y == doctest::Approx(0.2 + std::exp(-1.0 + 0.2)));
}

TEST_CASE("predictive_y_mn moments match Monte Carlo") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    LatentPoint p;
    p.has_phi = true;
    p.mean_f = u(rng);
    p.var_f = 0.3 + 0.2 * u(rng);
    p.mean_phi = 0.5 * u(rng);
    p.var_phi = 0.3 + 0.2 * u(rng);
    p.cov_fphi = 0.5 * std::sqrt(p.var_f * p.var_phi) * u(rng);
    p.mean_theta = -1.0 + 0.5 * u(rng);
    p.var_theta = 0.2;
    const auto r = predictive_y_mn(p);
    const Eigen::Matrix2d L = p.v().cov.llt().matrixL();
    const int N = 1000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const Eigen::Vector2d v = p.v().mean + L * Eigen::Vector2d(z(rng), z(rng));
      const double th = p.mean_theta + std::sqrt(p.var_theta) * z(rng);
      const double y = std::exp(0.5 * v(1)) * v(0) + std::exp(0.5 * th) * z(rng);
      s += y;
      s2 += y * y;
    }
    const double m = s / N;
    const double v = s2 / N - m * m;
    CHECK(std::abs(r.mean_y - m) < 4.0 * std::sqrt(v / N));
    CHECK(std::abs(r.var_y - v) < 0.01 * v);
  }
}

TEST_CASE("quadrature predictive density approaches the Gaussian one for a certain noise level") {
  LatentPoint p;
  p.mean_f = 0.2;
  p.var_f = 0.3;
  p.mean_theta = -2.0;
  p.var_theta = 1e-8;
  const auto r = predictive_y_n(p);
  for (double y : {-1.0, 0.2, 1.5}) {
    CHECK(predictive_log_density_quadrature(p, y) == doctest::Approx(predictive_log_density(r, y)).epsilon(1e-6));
  }
}

TEST_CASE("EP(m+n) with near-constant noise and signal processes reduces to the exact GP") {
  const Dataset d = generate_sim1(50, 6, 10).train;
  const double log_sf2 = std::log(0.25), log_s2 = std::log(0.03);
  HyperParams hp;
  hp.f.log_lengthscales = {0.2};
  hp.phi.log_magnitude = std::log(1e-10);
  hp.phi.constant_mean = log_sf2;
  hp.theta.log_magnitude = std::log(1e-10);
  hp.theta.constant_mean = log_s2;
  const EPState st = run_ep(d.X, d.y, hp, ModelKind::ep_mn);
  REQUIRE(st.converged);
  KernelParams k = hp.f;
  k.log_magnitude = log_sf2;
  const ExactGPModel gp(d.X, d.y, k, log_s2);
  const Matrix Xs = oracle::grid_inputs(100, -8, 8);
  const auto a = predictive_y(latent_predictive(st, hp, d.X, Xs));
  const auto b = gp.predict(Xs);
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(std::abs(a[j].mean_y - b[j].mean_y) < 1e-3);
    CHECK(std::abs(a[j].var_y - b[j].var_y) < 1e-3);
  }
}
