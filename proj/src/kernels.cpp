#include "hetgp/kernels.hpp"

#include <cmath>
#include <string>

#include "hetgp/errors.hpp"

namespace hetgp {

double KernelParams::magnitude() const { return std::exp(log_magnitude); }

void KernelParams::check_dim(Eigen::Index dim) const {
  const auto n = static_cast<Eigen::Index>(log_lengthscales.size());
  if (n != 1 && n != dim) {
    throw InputError("kernel has " + std::to_string(n) + " length-scales for " +
                     std::to_string(dim) + "-dimensional inputs");
  }
}

namespace {

// Inverse squared length-scale per dimension after isotropic broadcast.
Vector inverse_sq_lengthscales(const KernelParams& p, Eigen::Index dim) {
  p.check_dim(dim);
  Vector w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double log_l = p.isotropic() ? p.log_lengthscales[0] : p.log_lengthscales[i];
    w(i) = std::exp(-2.0 * log_l);
  }
  return w;
}

}  // namespace

double se_ard(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
              const KernelParams& p) {
  if (x.size() != x2.size()) {
    throw InputError("se_ard: input dimension mismatch");
  }
  const Vector w = inverse_sq_lengthscales(p, x.size());
  const double r2 = ((x - x2).array().square() * w.array()).sum();
  return p.magnitude() * std::exp(-0.5 * r2);
}

Matrix cross_cov(const Matrix& X, const Matrix& Xs, const KernelParams& p) {
  if (X.cols() != Xs.cols()) {
    throw InputError("cross_cov: input dimension mismatch");
  }
  const Vector w = inverse_sq_lengthscales(p, X.cols());
  const double sf2 = p.magnitude();
  const Vector s = w.cwiseSqrt();
  const Matrix A = X * s.asDiagonal();
  const Matrix B = Xs * s.asDiagonal();
  Matrix K(X.rows(), Xs.rows());
  for (Eigen::Index j = 0; j < Xs.rows(); ++j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      K(i, j) = sf2 * std::exp(-0.5 * (A.row(i) - B.row(j)).squaredNorm());
    }
  }
  return K;
}

Matrix cov_matrix(const Matrix& X, const KernelParams& p, double jitter) {
  const Vector w = inverse_sq_lengthscales(p, X.cols());
  const double sf2 = p.magnitude();
  const Matrix A = X * w.cwiseSqrt().asDiagonal();
  const Eigen::Index n = X.rows();
  Matrix K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = sf2 + jitter;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double k = sf2 * std::exp(-0.5 * (A.row(i) - A.row(j)).squaredNorm());
      K(i, j) = k;
      K(j, i) = k;
    }
  }
  return K;
}

double default_jitter(const KernelParams& p) { return 1e-8 * p.magnitude(); }

JitteredCholesky robust_cholesky(const Matrix& K, double magnitude) {
  const double max_jitter = 1e-2 * magnitude;
  JitteredCholesky out;
  for (double jitter = 1e-8 * magnitude; jitter <= max_jitter * (1.0 + 1e-9); jitter *= 10.0) {
    Matrix Kj = K;
    Kj.diagonal().array() += jitter;
    out.llt.compute(Kj);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
  }
  throw NumericalError("Cholesky failed after jitter escalation to " + std::to_string(max_jitter));
}

Matrix jittered_cov(const Matrix& X, const KernelParams& p) {
  Matrix K = cov_matrix(X, p);
  const auto chol = robust_cholesky(K, p.magnitude());
  K.diagonal().array() += chol.jitter;
  return K;
}

}  // namespace hetgp
