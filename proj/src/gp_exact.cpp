#include "hetgp/gp_exact.hpp"

#include <cmath>
#include <numbers>

#include "hetgp/errors.hpp"

namespace hetgp {

ExactGPModel::ExactGPModel(Matrix X, Vector y, KernelParams kernel, double log_noise_variance)
    : X_(std::move(X)), y_(std::move(y)), kernel_(std::move(kernel)),
      log_noise_variance_(log_noise_variance) {
  if (X_.rows() != y_.size() || X_.rows() == 0) {
    throw InputError("ExactGPModel: X and y must have the same non-zero number of rows");
  }
  kernel_.check_dim(X_.cols());
  K_ = cov_matrix(X_, kernel_);
  Matrix Ky = K_;
  Ky.diagonal().array() += noise_variance();
  chol_.compute(Ky);
  if (chol_.info() != Eigen::Success) {
    auto rc = robust_cholesky(Ky, kernel_.magnitude());
    chol_ = std::move(rc.llt);
    jitter_ = rc.jitter;
  }
  alpha_ = chol_.solve(y_);
}

double ExactGPModel::noise_variance() const { return std::exp(log_noise_variance_); }

double ExactGPModel::log_marginal() const {
  const double n = static_cast<double>(y_.size());
  const double log_det = 2.0 * chol_.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y_.dot(alpha_) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Vector ExactGPModel::log_marginal_gradient() const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index n_ls = static_cast<Eigen::Index>(kernel_.log_lengthscales.size());
  // Q = alpha alpha' - (K + s2 I)^-1; dL/dp = 0.5 tr(Q dK/dp)
  Matrix Q = alpha_ * alpha_.transpose() - chol_.solve(Matrix::Identity(n, n));
  Vector g(n_ls + 2);
  g(0) = 0.5 * (Q.array() * K_.array()).sum();
  for (Eigen::Index l = 0; l < n_ls; ++l) {
    const double inv_l2 = std::exp(-2.0 * kernel_.log_lengthscales[l]);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double r2;
        if (kernel_.isotropic()) {
          r2 = (X_.row(i) - X_.row(j)).squaredNorm();
        } else {
          const double d = X_(i, l) - X_(j, l);
          r2 = d * d;
        }
        acc += Q(i, j) * K_(i, j) * r2 * inv_l2;
      }
    }
    g(1 + l) = 0.5 * acc;
  }
  g(n_ls + 1) = 0.5 * noise_variance() * Q.trace();
  return g;
}

std::vector<PredictiveResult> ExactGPModel::predict(const Matrix& Xs) const {
  const Matrix Ks = cross_cov(X_, Xs, kernel_);
  const Vector mean = Ks.transpose() * alpha_;
  const Matrix V = chol_.matrixL().solve(Ks);
  const double sf2 = kernel_.magnitude();
  std::vector<PredictiveResult> out(static_cast<std::size_t>(Xs.rows()));
  for (Eigen::Index j = 0; j < Xs.rows(); ++j) {
    const double var_f = std::max(sf2 - V.col(j).squaredNorm(), 0.0);
    out[static_cast<std::size_t>(j)] = {mean(j), var_f + noise_variance(), std::nullopt};
  }
  return out;
}

double exact_log_marginal(const Matrix& X, const Vector& y, const ExactGPModel& model) {
  if (X.rows() == model.X().rows() && X == model.X() && y == model.y()) {
    return model.log_marginal();
  }
  return ExactGPModel(X, y, model.kernel(), model.log_noise_variance()).log_marginal();
}

std::vector<PredictiveResult> exact_predict(const ExactGPModel& model, const Matrix& Xs) {
  return model.predict(Xs);
}

Vector exact_lml_gradient(const Matrix& X, const Vector& y, const ExactGPModel& model) {
  if (X.rows() == model.X().rows() && X == model.X() && y == model.y()) {
    return model.log_marginal_gradient();
  }
  return ExactGPModel(X, y, model.kernel(), model.log_noise_variance()).log_marginal_gradient();
}

}  // namespace hetgp
