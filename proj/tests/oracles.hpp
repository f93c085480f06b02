#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "hetgp/ep.hpp"
#include "hetgp/gp_exact.hpp"

namespace oracle {

using hetgp::Matrix;
using hetgp::Vector;

inline Matrix random_pd(Eigen::Index n, std::mt19937_64& rng, double ridge = 0.5) {
  std::normal_distribution<double> z;
  Matrix A(n, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = z(rng);
  return A * A.transpose() / static_cast<double>(n) + ridge * Matrix::Identity(n, n);
}

inline Matrix grid_inputs(Eigen::Index n, double lo, double hi) {
  Matrix X(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return X;
}

// Dense homoscedastic GP: log marginal and predictive moments by direct inversion.
struct DenseGP {
  Matrix Ky;
  Matrix Kinv;
  Vector y;
  double log_marginal = 0.0;

  DenseGP(const Matrix& X, const Vector& yy, const hetgp::KernelParams& k, double noise_var)
      : y(yy) {
    Ky = hetgp::cov_matrix(X, k);
    Ky.diagonal().array() += noise_var;
    Eigen::FullPivLU<Matrix> lu(Ky);
    Kinv = lu.inverse();
    log_marginal = -0.5 * y.dot(Kinv * y) - 0.5 * std::log(lu.determinant()) -
                   0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
  }
};

// Sigma = (K^-1 + T)^-1, mu = Sigma (K^-1 m + nu), by dense inversion.
struct DensePosterior {
  Matrix Sigma;
  Vector mu;
  double log_det_i_kt = 0.0;

  DensePosterior(const hetgp::LatentPrior& prior, const Matrix& T, const Vector& nu) {
    const Matrix K = prior.K();
    const Matrix Kinv = K.inverse();
    Sigma = (Kinv + T).inverse();
    mu = Sigma * (Kinv * prior.mean + nu);
    log_det_i_kt = std::log((Matrix::Identity(K.rows(), K.rows()) + K * T).determinant());
  }
};

}  // namespace oracle
