#include <doctest.h>

#include <cmath>

#include "hetgp/errors.hpp"
#include "hetgp/kernels.hpp"
#include "oracles.hpp"

using namespace hetgp;

TEST_CASE("se_ard matches the closed form") {
  KernelParams p;
  p.log_magnitude = std::log(2.0);
  p.log_lengthscales = {0.0, std::log(2.0)};
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 2.0;
  CHECK(se_ard(a, b, p) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(se_ard(a, a, p) == doctest::Approx(2.0));
  CHECK(p.magnitude() == doctest::Approx(2.0));
}

TEST_CASE("an isotropic length-scale is broadcast over dimensions") {
  KernelParams iso;
  iso.log_lengthscales = {0.3};
  KernelParams ard = iso;
  ard.log_lengthscales = {0.3, 0.3, 0.3};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Matrix X(6, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = z(rng);
  CHECK((cov_matrix(X, iso) - cov_matrix(X, ard)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cov_matrix is symmetric with the jitter on the diagonal") {
  KernelParams p;
  p.log_magnitude = 0.7;
  p.log_lengthscales = {-0.2};
  const Matrix X = oracle::grid_inputs(9, -2, 2);
  const Matrix K = cov_matrix(X, p, 1e-3);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(K(4, 4) == doctest::Approx(std::exp(0.7) + 1e-3));
  const Matrix C = cross_cov(X, X.topRows(3), p);
  CHECK(C.rows() == 9);
  CHECK(C.cols() == 3);
  CHECK(C(5, 2) == doctest::Approx(K(5, 2)));
}

TEST_CASE("length-scale count must be 1 or the input dimension") {
  KernelParams p;
  p.log_lengthscales = {0.0, 0.0};
  CHECK_NOTHROW(p.check_dim(2));
  CHECK_THROWS_AS(p.check_dim(3), InputError);
}

TEST_CASE("robust_cholesky escalates the jitter for a singular matrix") {
  KernelParams p;
  Matrix X(4, 1);
  X << 0.0, 0.0, 1.0, 1.0;  // duplicated inputs make K singular
  const Matrix K = cov_matrix(X, p);
  const auto c = robust_cholesky(K, p.magnitude());
  CHECK(c.llt.info() == Eigen::Success);
  CHECK(c.jitter > 0.0);
  Matrix Kj = K;
  Kj.diagonal().array() += c.jitter;
  const Matrix L = c.llt.matrixL();
  CHECK((L * L.transpose() - Kj).cwiseAbs().maxCoeff() < 1e-12);
}
