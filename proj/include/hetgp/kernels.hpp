#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hetgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Squared-exponential hyperparameters for one latent process, all in log space.
// A single length-scale is broadcast over every input dimension.
struct KernelParams {
  double log_magnitude = 0.0;
  std::vector<double> log_lengthscales{0.0};
  double constant_mean = 0.0;

  double magnitude() const;
  bool isotropic() const { return log_lengthscales.size() == 1; }
  // Throws InputError unless the length-scale count is 1 or `dim`.
  void check_dim(Eigen::Index dim) const;
};

// sigma_f^2 * exp(-sum_i (x_i - x2_i)^2 / (2 l_i^2))
double se_ard(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
              const KernelParams& p);

// K[i][j] = se_ard(x_i, x_j) + jitter * [i == j]. Rows of X are points.
Matrix cov_matrix(const Matrix& X, const KernelParams& p, double jitter = 0.0);

// n x m matrix of se_ard(x_i, xs_j).
Matrix cross_cov(const Matrix& X, const Matrix& Xs, const KernelParams& p);

// Default diagonal jitter for a kernel: 1e-8 times its magnitude.
double default_jitter(const KernelParams& p);

// Cholesky factor of K + jitter*I, multiplying the jitter by 10 on failure
// up to 1e-2 * magnitude. `K` must not already include jitter.
struct JitteredCholesky {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
};
JitteredCholesky robust_cholesky(const Matrix& K, double magnitude);

// Prior covariance with the escalated jitter actually applied.
Matrix jittered_cov(const Matrix& X, const KernelParams& p);

}  // namespace hetgp
