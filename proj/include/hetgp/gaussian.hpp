#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace hetgp {

// Moment-form Gaussian in D dimensions (D = 1 or 2).
template <int D>
struct Gaussian {
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  Vec mean = Vec::Zero();
  Mat cov = Mat::Zero();
};

// Natural parameters: nu = Sigma^-1 mu, tau = Sigma^-1.
template <int D>
struct NatParams {
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  Vec nu = Vec::Zero();
  Mat tau = Mat::Zero();

  NatParams operator-(const NatParams& o) const { return {nu - o.nu, tau - o.tau}; }
  NatParams operator+(const NatParams& o) const { return {nu + o.nu, tau + o.tau}; }
  NatParams operator*(double s) const { return {s * nu, s * tau}; }
  double max_abs() const { return std::max(nu.cwiseAbs().maxCoeff(), tau.cwiseAbs().maxCoeff()); }
};

using Gaussian1 = Gaussian<1>;
using Gaussian2 = Gaussian<2>;
using Site1 = NatParams<1>;
using Site2 = NatParams<2>;

inline Gaussian1 gaussian1(double mean, double var) {
  Gaussian1 g;
  g.mean(0) = mean;
  g.cov(0, 0) = var;
  return g;
}

template <int D>
bool is_pd(const Eigen::Matrix<double, D, D>& m) {
  if constexpr (D == 1) {
    return std::isfinite(m(0, 0)) && m(0, 0) > 0.0;
  } else {
    return std::isfinite(m(0, 0)) && std::isfinite(m(1, 1)) && std::isfinite(m(0, 1)) &&
           m(0, 0) > 0.0 && m(1, 1) > 0.0 && m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) > 0.0;
  }
}

template <int D>
NatParams<D> to_natural(const Gaussian<D>& g) {
  NatParams<D> n;
  n.tau = g.cov.inverse();
  n.tau = 0.5 * (n.tau + n.tau.transpose()).eval();
  n.nu = n.tau * g.mean;
  return n;
}

// Requires tau positive definite.
template <int D>
Gaussian<D> to_moments(const NatParams<D>& n) {
  Gaussian<D> g;
  g.cov = n.tau.inverse();
  g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
  g.mean = g.cov * n.nu;
  return g;
}

// Log-partition 0.5 m' V^-1 m + 0.5 log|V| without the 2 pi term.
template <int D>
double log_partition(const Gaussian<D>& g) {
  return 0.5 * g.mean.dot(g.cov.inverse() * g.mean) + 0.5 * std::log(g.cov.determinant());
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

}  // namespace hetgp
