#include <doctest.h>

#include <cmath>

#include "hetgp/gp_exact.hpp"
#include "oracles.hpp"

using namespace hetgp;

namespace {

struct Problem {
  Matrix X;
  Vector y;
  KernelParams k;
  double log_noise = std::log(0.05);
};

Problem make_problem(Eigen::Index n, Eigen::Index dim, bool ard, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::normal_distribution<double> z;
  Problem p;
  p.X.resize(n, dim);
  for (Eigen::Index i = 0; i < p.X.size(); ++i) p.X(i) = u(rng);
  p.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) p.y(i) = std::sin(p.X.row(i).sum()) + 0.2 * z(rng);
  p.k.log_magnitude = 0.3;
  p.k.log_lengthscales = ard ? std::vector<double>(static_cast<std::size_t>(dim), 0.0) : std::vector<double>{0.2};
  if (ard) {
    for (Eigen::Index j = 0; j < dim; ++j) p.k.log_lengthscales[static_cast<std::size_t>(j)] = 0.1 * static_cast<double>(j) - 0.2;
  }
  return p;
}

}  // namespace

TEST_CASE("exact GP log marginal matches dense inversion") {
  const Problem p = make_problem(30, 2, true, 1);
  const ExactGPModel m(p.X, p.y, p.k, p.log_noise);
  const oracle::DenseGP d(p.X, p.y, p.k, std::exp(p.log_noise));
  CHECK(m.log_marginal() == doctest::Approx(d.log_marginal).epsilon(1e-7));
  CHECK(exact_log_marginal(p.X, p.y, m) == doctest::Approx(d.log_marginal).epsilon(1e-7));
}

TEST_CASE("exact GP predictions match dense conditioning") {
  const Problem p = make_problem(25, 1, false, 2);
  const ExactGPModel m(p.X, p.y, p.k, p.log_noise);
  const oracle::DenseGP d(p.X, p.y, p.k, std::exp(p.log_noise));
  const Matrix Xs = oracle::grid_inputs(17, -4, 4);
  const auto preds = exact_predict(m, Xs);
  const Matrix Ks = cross_cov(p.X, Xs, p.k);
  for (Eigen::Index j = 0; j < Xs.rows(); ++j) {
    const double mean = Ks.col(j).dot(d.Kinv * p.y);
    const double var = p.k.magnitude() - Ks.col(j).dot(d.Kinv * Ks.col(j)) + std::exp(p.log_noise);
    CHECK(preds[static_cast<std::size_t>(j)].mean_y == doctest::Approx(mean).epsilon(1e-7));
    CHECK(preds[static_cast<std::size_t>(j)].var_y == doctest::Approx(var).epsilon(1e-7));
  }
}

TEST_CASE("exact GP gradient matches central finite differences") {
  for (bool ard : {false, true}) {
    const Problem p = make_problem(40, 2, ard, 3);
    const ExactGPModel m(p.X, p.y, p.k, p.log_noise);
    const Vector g = m.log_marginal_gradient();
    const Eigen::Index nls = static_cast<Eigen::Index>(p.k.log_lengthscales.size());
    REQUIRE(g.size() == nls + 2);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      auto eval = [&](double step) {
        KernelParams k = p.k;
        double ln = p.log_noise;
        if (i == 0) k.log_magnitude += step;
        else if (i <= nls) k.log_lengthscales[static_cast<std::size_t>(i - 1)] += step;
        else ln += step;
        return ExactGPModel(p.X, p.y, k, ln).log_marginal();
      };
      const double fd = (eval(h) - eval(-h)) / (2.0 * h);
      CHECK(std::abs(fd - g(i)) / std::max(1.0, std::abs(g(i))) < 1e-4);
    }
  }
}
