#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "hetgp/datasets.hpp"
#include "hetgp/errors.hpp"

using namespace hetgp;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hetgp_ds_" + name)).string();
}

double npdf(double x, double m, double s) {
  return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST_CASE("sim1 generating functions") {
  CHECK(sim1::signal_sd(0.0) == doctest::Approx(2.0 * npdf(0.0, 2.5, 1.0)));
  CHECK(sim1::noise_sd(0.0) == doctest::Approx(0.08 + 2.0 * npdf(0.0, 8.0, 3.0)));
  CHECK(sim1::noise_sd(8.0) == doctest::Approx(0.08 + npdf(8.0, -8.0, 3.0) + npdf(0.0, 0.0, 3.0)));
  CHECK(sim1::mean(1.3) == doctest::Approx(sim1::signal_sd(1.3) * std::sin(1.3)));
}

TEST_CASE("sim2 generating functions") {
  CHECK(sim2::signal_sd(0.0) == doctest::Approx(1.0));
  CHECK(sim2::signal_sd(2.0) == doctest::Approx(std::exp(2.0 * std::sin(0.4))));
  CHECK(sim2::noise_sd(0.0) == doctest::Approx(std::exp(0.75 * std::sin(1.0)) + 0.1));
}

TEST_CASE("simulated suites: sizes, ranges, truth and determinism") {
  const SimPair a = generate_sim1(200, 7);
  CHECK(a.train.size() == 200);
  CHECK(a.test.size() == 1000);
  CHECK(a.train.X.minCoeff() >= -8.0);
  CHECK(a.train.X.maxCoeff() <= 8.0);
  REQUIRE(a.test.truth);
  CHECK(a.test.X(0, 0) == doctest::Approx(-8.0 + 0.008));
  CHECK((a.test.y - a.test.truth->mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.test.truth->noise_sd(10) == doctest::Approx(sim1::noise_sd(a.test.X(10, 0))));
  const SimPair b = generate_sim1(200, 7);
  CHECK((a.train.y - b.train.y).cwiseAbs().maxCoeff() == 0.0);
  const SimPair c = generate_sim1(200, 8);
  CHECK((a.train.y - c.train.y).cwiseAbs().maxCoeff() > 0.0);
  CHECK(generate_sim2(150, 1).train.size() == 150);
  CHECK_THROWS_AS(generate_sim1(0, 1), InputError);
}

TEST_CASE("simulated noise has the generating standard deviation") {
  const SimPair p = generate_sim2(20000, 3, 10);
  const Vector z = (p.train.y - p.train.truth->mean).cwiseQuotient(p.train.truth->noise_sd);
  CHECK(std::abs(z.mean()) < 0.03);
  CHECK(std::abs(std::sqrt(z.squaredNorm() / 20000.0) - 1.0) < 0.03);
}

TEST_CASE("CSV round trip is exact") {
  const SimPair p = generate_sim1(50, 2, 20);
  const std::string path = temp_path("rt.csv");
  write_csv(path, p.test);
  const Dataset d = load_csv(path, {{"x0"}, "y", true});
  CHECK((d.X - p.test.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.y - p.test.y).cwiseAbs().maxCoeff() == 0.0);
  const Dataset by_index = load_csv(path, {{"0"}, "2", true});
  CHECK((by_index.y - p.test.truth->mean).cwiseAbs().maxCoeff() == 0.0);
  const Dataset inputs = load_csv(path, {{"x0"}, "", true});
  CHECK(std::isnan(inputs.y(0)));
  std::filesystem::remove(path);
}

TEST_CASE("CSV errors carry line numbers or schema messages") {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream f(path);
    f << "a,b\n1,2\n3,oops\n";
  }
  try {
    load_csv(path, {{"a"}, "b", true});
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_csv(path, {{"zzz"}, "b", true}), SchemaError);
  CHECK_THROWS_AS(load_csv(path, {{}, "b", true}), SchemaError);
  CHECK_THROWS_AS(load_csv(temp_path("missing.csv"), {{"a"}, "b", true}), InputError);
  {
    std::ofstream f(path);
    f << "1,2\n3,4\n";
  }
  const Dataset d = load_csv(path, {{"0"}, "1", false});
  CHECK(d.size() == 2);
  CHECK(d.y(1) == 4.0);
  std::filesystem::remove(path);
}

TEST_CASE("standardization") {
  const Dataset raw = motorcycle();
  CHECK(raw.size() == 133);
  auto [d, tr] = standardize(raw);
  CHECK(std::abs(d.y.mean()) < 1e-12);
  CHECK(std::sqrt((d.y.array() - d.y.mean()).square().sum() / 132.0) == doctest::Approx(1.0));
  CHECK(std::abs(d.X.col(0).mean()) < 1e-12);
  CHECK(tr.invert_y(d.y(5)) == doctest::Approx(raw.y(5)));
  CHECK(tr.invert_var(1.0) == doctest::Approx(tr.y_sd * tr.y_sd));
  CHECK(tr.log_jacobian() == doctest::Approx(-std::log(tr.y_sd)));
  CHECK_FALSE(tr.is_identity());
  CHECK(Standardization::identity(2).is_identity());
  CHECK((tr.apply_x(raw.X) - d.X).cwiseAbs().maxCoeff() < 1e-14);
}
