#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "hetgp/artifact.hpp"
#include "hetgp/errors.hpp"
#include "oracles.hpp"

using namespace hetgp;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hetgp_art_" + name)).string();
}

HyperParams params() {
  HyperParams hp;
  hp.f.log_lengthscales = {-0.5};
  hp.log_noise_variance = -2.0;
  hp.theta.log_magnitude = 0.3;
  hp.theta.log_lengthscales = {0.2};
  hp.theta.constant_mean = -2.0;
  hp.phi.log_magnitude = -0.5;
  hp.phi.log_lengthscales = {0.4};
  return hp;
}

struct Fixture {
  Dataset raw = motorcycle();
  Dataset d;
  Standardization tr;
  Fixture() { std::tie(d, tr) = standardize(raw); }
};

}  // namespace

TEST_CASE("artifacts round trip through JSON to bitwise identical predictions") {
  Fixture fx;
  const Matrix Xq = oracle::grid_inputs(25, 0.0, 60.0);
  for (ModelKind kind : {ModelKind::gp, ModelKind::ep_n, ModelKind::ep_mn}) {
    CAPTURE(to_string(kind));
    const FittedModel m = fit_fixed(fx.d.X, fx.d.y, kind, params());
    const ModelArtifact a = make_artifact(m, fx.tr, false, {"times"}, "accel");
    const std::string path = temp_path(to_string(kind) + ".json");
    save_artifact(path, a);
    const ModelArtifact b = load_artifact(path);
    std::filesystem::remove(path);
    CHECK(b.kind == kind);
    CHECK(b.x_columns == std::vector<std::string>{"times"});
    CHECK(b.y_column == "accel");
    CHECK(b.log_evidence == a.log_evidence);
    CHECK(b.fingerprint_matches());
    CHECK((b.X - fx.d.X).cwiseAbs().maxCoeff() == 0.0);

    const auto p0 = predict_original(m, fx.tr, Xq);
    const auto p1 = predict_original(a.restore(), a.standardization, Xq);
    const auto p2 = predict_original(b.restore(), b.standardization, Xq);
    for (std::size_t j = 0; j < p0.size(); ++j) {
      CHECK(p2[j].mean_y == p1[j].mean_y);
      CHECK(p2[j].var_y == p1[j].var_y);
      CHECK(p1[j].mean_y == doctest::Approx(p0[j].mean_y).epsilon(1e-9));
      CHECK(p1[j].var_y == doctest::Approx(p0[j].var_y).epsilon(1e-9));
    }
  }
}

TEST_CASE("original-scale predictions invert the standardization") {
  Fixture fx;
  const FittedModel m = fit_fixed(fx.d.X, fx.d.y, ModelKind::gp, params());
  const Matrix Xq = oracle::grid_inputs(5, 0.0, 60.0);
  const auto raw = predict_original(m, fx.tr, Xq);
  const auto std_scale = m.predict(fx.tr.apply_x(Xq));
  for (std::size_t j = 0; j < raw.size(); ++j) {
    CHECK(raw[j].mean_y == doctest::Approx(fx.tr.invert_y(std_scale[j].mean_y)));
    CHECK(raw[j].var_y == doctest::Approx(fx.tr.invert_var(std_scale[j].var_y)));
  }
}

TEST_CASE("fingerprint detects altered training data") {
  Fixture fx;
  ModelArtifact a = make_artifact(fit_fixed(fx.d.X, fx.d.y, ModelKind::gp, params()), fx.tr, false,
                                  {"times"}, "accel");
  CHECK(a.fingerprint_matches());
  CHECK(a.fingerprint.rows == 133);
  a.y(7) += 1e-9;
  CHECK_FALSE(a.fingerprint_matches());
  CHECK(column_hash(fx.d.X, fx.d.y) != column_hash(fx.d.X, a.y));
}

TEST_CASE("malformed artifacts raise schema errors") {
  Fixture fx;
  const nlohmann::json good =
      to_json(make_artifact(fit_fixed(fx.d.X, fx.d.y, ModelKind::ep_n, params()), fx.tr, false, {"times"}, "accel"));
  CHECK_NOTHROW(artifact_from_json(good));
  auto broken = [&](auto&& edit) {
    nlohmann::json j = good;
    edit(j);
    return j;
  };
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j["format"] = "other"; })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j["schema_version"] = 99; })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j.erase("hyperparameters"); })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j.erase("sites"); })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j["sites"]["theta"].erase(0); })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j["model_kind"] = "ep-xyz"; })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(broken([](auto& j) { j["training"]["y"][0] = "a"; })), SchemaError);
  CHECK_THROWS_AS(artifact_from_json(nlohmann::json::array()), SchemaError);

  const std::string path = temp_path("garbage.json");
  {
    std::ofstream f(path);
    f << "{not json";
  }
  CHECK_THROWS_AS(load_artifact(path), SchemaError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_artifact(temp_path("missing.json")), InputError);
}
