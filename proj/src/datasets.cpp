#include "hetgp/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hetgp/errors.hpp"

namespace hetgp {

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.name = name;
  out.seed = seed;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.X.resize(m, X.cols());
  out.y.resize(m);
  if (truth) out.truth = Truth{Vector(m), Vector(m)};
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    out.X.row(r) = X.row(i);
    out.y(r) = y(i);
    if (truth) {
      out.truth->mean(r) = truth->mean(i);
      out.truth->noise_sd(r) = truth->noise_sd(i);
    }
  }
  return out;
}

double normal_pdf(double x, double mu, double s) {
  const double z = (x - mu) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

namespace sim1 {
double signal_sd(double x) { return normal_pdf(x, -2.5, 1.0) + normal_pdf(x, 2.5, 1.0); }
double noise_sd(double x) { return 0.08 + normal_pdf(x, -8.0, 3.0) + normal_pdf(x, 8.0, 3.0); }
double mean(double x) { return signal_sd(x) * std::sin(x); }
}  // namespace sim1

namespace sim2 {
double signal_sd(double x) { return std::exp(2.0 * std::sin(0.2 * x)); }
double noise_sd(double x) { return std::exp(0.75 * std::sin(0.5 * x + 1.0)) + 0.1; }
double mean(double x) { return signal_sd(x) * std::sin(x); }
}  // namespace sim2

namespace {

template <class Mean, class Noise>
SimPair generate(const std::string& name, std::size_t n_train, std::uint64_t seed,
                 std::size_t n_test, Mean mean, Noise noise) {
  if (n_train < 1) throw InputError("simulated data needs at least one training point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-8.0, 8.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimPair p;
  const auto n = static_cast<Eigen::Index>(n_train);
  p.train.name = name;
  p.train.seed = seed;
  p.train.X.resize(n, 1);
  p.train.y.resize(n);
  p.train.truth = Truth{Vector(n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = unif(rng);
    p.train.X(i, 0) = x;
    p.train.truth->mean(i) = mean(x);
    p.train.truth->noise_sd(i) = noise(x);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    p.train.y(i) = p.train.truth->mean(i) + p.train.truth->noise_sd(i) * normal(rng);
  }

  const auto m = static_cast<Eigen::Index>(n_test);
  p.test.name = name + "-test";
  p.test.seed = seed;
  p.test.X.resize(m, 1);
  p.test.y.resize(m);
  p.test.truth = Truth{Vector(m), Vector(m)};
  const double h = 16.0 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = -8.0 + (static_cast<double>(i) + 0.5) * h;
    p.test.X(i, 0) = x;
    p.test.y(i) = mean(x);
    p.test.truth->mean(i) = mean(x);
    p.test.truth->noise_sd(i) = noise(x);
  }
  return p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::size_t resolve_column(const std::string& col, const std::vector<std::string>& header) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == col) return i;
  }
  std::size_t idx = 0;
  auto [ptr, ec] = std::from_chars(col.data(), col.data() + col.size(), idx);
  if (ec == std::errc{} && ptr == col.data() + col.size()) return idx;
  throw SchemaError("unknown column '" + col + "'");
}

}  // namespace

SimPair generate_sim1(std::size_t n_train, std::uint64_t seed, std::size_t n_test) {
  return generate("sim1", n_train, seed, n_test, sim1::mean, sim1::noise_sd);
}

SimPair generate_sim2(std::size_t n_train, std::uint64_t seed, std::size_t n_test) {
  return generate("sim2", n_train, seed, n_test, sim2::mean, sim2::noise_sd);
}

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  if (opts.x_columns.empty()) throw SchemaError("no input columns selected");

  std::vector<std::string> header;
  std::string line;
  int line_no = 0;
  if (opts.header) {
    if (!std::getline(in, line)) throw FormatError("empty file", 1);
    ++line_no;
    header = split_csv_line(line);
  }
  std::vector<std::size_t> xcols;
  for (const auto& c : opts.x_columns) xcols.push_back(resolve_column(c, header));
  const bool has_y = !opts.y_column.empty();
  const std::size_t ycol = has_y ? resolve_column(opts.y_column, header) : 0;
  if (!header.empty()) {
    for (auto c : xcols) {
      if (c >= header.size()) throw SchemaError("column index out of range");
    }
    if (has_y && ycol >= header.size()) throw SchemaError("column index out of range");
  }

  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    auto get = [&](std::size_t c) {
      if (c >= fields.size()) throw SchemaError("missing column on line " + std::to_string(line_no));
      double v = 0.0;
      if (!parse_real(fields[c], v)) {
        throw FormatError("cannot parse '" + fields[c] + "' as a real", line_no);
      }
      return v;
    };
    std::vector<double> row;
    for (auto c : xcols) row.push_back(get(c));
    xs.push_back(std::move(row));
    ys.push_back(has_y ? get(ycol) : std::numeric_limits<double>::quiet_NaN());
  }
  if (ys.empty()) throw FormatError("no data rows", line_no == 0 ? 1 : line_no);

  Dataset ds;
  ds.name = path;
  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto d = static_cast<Eigen::Index>(xcols.size());
  ds.X.resize(n, d);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) ds.X(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    ds.y(i) = ys[static_cast<std::size_t>(i)];
  }
  return ds;
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << "x" << j << ",";
  out << "y";
  if (ds.truth) out << ",true_mean,true_sd";
  out << "\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << ds.X(i, j) << ",";
    out << ds.y(i);
    if (ds.truth) out << "," << ds.truth->mean(i) << "," << ds.truth->noise_sd(i);
    out << "\n";
  }
}

Matrix Standardization::apply_x(const Matrix& X) const {
  return (X.rowwise() - x_mean.transpose()).array().rowwise() / x_sd.transpose().array();
}

Vector Standardization::apply_y(const Vector& y) const {
  return (y.array() - y_mean) / y_sd;
}

Dataset Standardization::apply(const Dataset& ds) const {
  Dataset out = ds;
  out.X = apply_x(ds.X);
  out.y = apply_y(ds.y);
  if (out.truth) {
    out.truth->mean = apply_y(ds.truth->mean);
    out.truth->noise_sd = ds.truth->noise_sd / y_sd;
  }
  return out;
}

double Standardization::log_jacobian() const { return -std::log(y_sd); }

bool Standardization::is_identity() const {
  return y_mean == 0.0 && y_sd == 1.0 && (x_mean.array() == 0.0).all() &&
         (x_sd.array() == 1.0).all();
}

Standardization Standardization::identity(Eigen::Index dim) {
  Standardization s;
  s.x_mean = Vector::Zero(dim);
  s.x_sd = Vector::Ones(dim);
  return s;
}

std::pair<Dataset, Standardization> standardize(const Dataset& ds) {
  const Eigen::Index n = ds.size();
  if (n < 2) throw InputError("standardize needs at least two rows");
  auto sd_of = [n](const Vector& c, double mean) {
    return std::sqrt((c.array() - mean).square().sum() / static_cast<double>(n - 1));
  };
  Standardization t = Standardization::identity(ds.dim());
  for (Eigen::Index j = 0; j < ds.dim(); ++j) {
    const Vector col = ds.X.col(j);
    const double m = col.mean();
    const double s = sd_of(col, m);
    if (s > 0.0) {
      t.x_mean(j) = m;
      t.x_sd(j) = s;
    } else {
      std::cerr << "warning: input column " << j << " has zero variance; left untransformed\n";
    }
  }
  const double my = ds.y.mean();
  const double sy = sd_of(ds.y, my);
  if (sy > 0.0) {
    t.y_mean = my;
    t.y_sd = sy;
  } else {
    std::cerr << "warning: target has zero variance; left untransformed\n";
  }
  return {t.apply(ds), t};
}

}  // namespace hetgp
