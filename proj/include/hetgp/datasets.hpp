#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetgp/kernels.hpp"

namespace hetgp {

// Generating mean and noise standard deviation at each input (simulated data).
struct Truth {
  Vector mean;
  Vector noise_sd;
};

struct Dataset {
  Matrix X;
  Vector y;
  std::optional<Truth> truth;
  std::string name;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dim() const { return X.cols(); }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct SimPair {
  Dataset train;
  Dataset test;
};

// N(x | mu, s) with s the standard deviation.
double normal_pdf(double x, double mu, double s);

namespace sim1 {
double signal_sd(double x);  // N(x|-2.5,1) + N(x|2.5,1)
double noise_sd(double x);   // 0.08 + N(x|-8,3) + N(x|8,3)
double mean(double x);       // signal_sd(x) * sin(x)
}  // namespace sim1

namespace sim2 {
double signal_sd(double x);  // exp(2 sin(0.2 x))
double noise_sd(double x);   // exp(0.75 sin(0.5 x + 1)) + 0.1
double mean(double x);
}  // namespace sim2

// Train inputs ~ U(-8, 8); test is a uniform grid on (-8, 8) with noiseless
// truth recorded. Test targets hold the true mean.
SimPair generate_sim1(std::size_t n_train = 200, std::uint64_t seed = 0, std::size_t n_test = 1000);
SimPair generate_sim2(std::size_t n_train = 150, std::uint64_t seed = 0, std::size_t n_test = 1000);

Dataset motorcycle();

struct CsvOptions {
  std::vector<std::string> x_columns;  // names when a header exists, else 0-based indices
  std::string y_column;  // empty: inputs only, y is filled with NaN
  bool header = true;
};

// Throws FormatError (with line number) or SchemaError.
Dataset load_csv(const std::string& path, const CsvOptions& opts);
// Writes x0..x{d-1}, y and, if present, true_mean and true_sd columns.
void write_csv(const std::string& path, const Dataset& ds);

// Per-column affine map to zero mean and unit standard deviation.
struct Standardization {
  Vector x_mean, x_sd;
  double y_mean = 0.0, y_sd = 1.0;

  Matrix apply_x(const Matrix& X) const;
  Vector apply_y(const Vector& y) const;
  Dataset apply(const Dataset& ds) const;
  double invert_y(double y) const { return y * y_sd + y_mean; }
  double invert_var(double v) const { return v * y_sd * y_sd; }
  // Added to a standardized-scale log density to obtain the original-scale one.
  double log_jacobian() const;
  bool is_identity() const;
  static Standardization identity(Eigen::Index dim);
};

// Zero-variance columns are left untransformed. Requires n >= 2.
std::pair<Dataset, Standardization> standardize(const Dataset& ds);

}  // namespace hetgp
