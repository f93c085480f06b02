#pragma once

#include <vector>

#include "hetgp/kernels.hpp"
#include "hetgp/predictive_result.hpp"

namespace hetgp {

// Homoscedastic GP regression, f ~ GP(0, k), y = f + eps, eps ~ N(0, sigma^2).
class ExactGPModel {
 public:
  ExactGPModel(Matrix X, Vector y, KernelParams kernel, double log_noise_variance);

  const KernelParams& kernel() const { return kernel_; }
  double log_noise_variance() const { return log_noise_variance_; }
  double noise_variance() const;
  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }

  double log_marginal() const;
  // d/d(log sigma_f^2, log l_1..log l_k, log sigma^2), k = number of stored length-scales.
  Vector log_marginal_gradient() const;
  std::vector<PredictiveResult> predict(const Matrix& Xs) const;

 private:
  Matrix X_;
  Vector y_;
  KernelParams kernel_;
  double log_noise_variance_;
  Matrix K_;  // kernel matrix without noise
  Eigen::LLT<Matrix> chol_;
  double jitter_ = 0.0;
  Vector alpha_;
};

double exact_log_marginal(const Matrix& X, const Vector& y, const ExactGPModel& model);
std::vector<PredictiveResult> exact_predict(const ExactGPModel& model, const Matrix& Xs);
Vector exact_lml_gradient(const Matrix& X, const Vector& y, const ExactGPModel& model);

}  // namespace hetgp
