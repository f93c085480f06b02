#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hetgp/datasets.hpp"
#include "hetgp/errors.hpp"
#include "hetgp/model_select.hpp"
#include "hetgp/nelder_mead.hpp"

using namespace hetgp;

TEST_CASE("parameter counts and names") {
  CHECK(free_parameter_count(ModelKind::gp, 1, false) == 3);
  CHECK(free_parameter_count(ModelKind::gp, 3, true) == 5);
  CHECK(free_parameter_count(ModelKind::ep_n, 1, false) == 5);
  CHECK(free_parameter_count(ModelKind::ep_mn, 1, false) == 7);
  CHECK(parameter_names(ModelKind::ep_mn, 2, true).size() == 8);
  CHECK(parameter_names(ModelKind::gp, 1, false).back() == "log_noise_variance");
}

TEST_CASE("pack and unpack are inverse") {
  for (ModelKind kind : {ModelKind::gp, ModelKind::ep_n, ModelKind::ep_mn}) {
    for (bool ard : {false, true}) {
      const std::size_t k = free_parameter_count(kind, 2, ard);
      Vector v(static_cast<Eigen::Index>(k));
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 0.1 * static_cast<double>(i) - 0.3;
      const HyperParams hp = unpack_params(kind, v, 2, ard);
      CHECK((pack_params(kind, hp, ard) - v).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
  CHECK_THROWS_AS(unpack_params(ModelKind::gp, Vector::Zero(2), 1, false), InputError);
  const HyperParams clipped = unpack_params(ModelKind::gp, Vector::Constant(3, 50.0), 1, false, 20.0);
  CHECK(clipped.log_noise_variance == 20.0);
}

TEST_CASE("Nelder-Mead minimizes the Rosenbrock function") {
  auto rosen = [](const Vector& x) {
    return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
  };
  NelderMeadOptions o;
  o.max_evals = 2000;
  o.xtol = 1e-8;
  o.ftol = 1e-12;
  const auto r = nelder_mead(rosen, Vector::Constant(2, -1.0), o);
  CHECK(r.converged);
  CHECK(std::abs(r.x(0) - 1.0) < 1e-3);
  CHECK(std::abs(r.x(1) - 1.0) < 1e-3);
}

TEST_CASE("Nelder-Mead respects the box and infeasible points") {
  auto f = [](const Vector& x) {
    if (x(0) > 0.5) return std::numeric_limits<double>::infinity();
    return (x(0) - 3.0) * (x(0) - 3.0) + x(1) * x(1);
  };
  NelderMeadOptions o;
  o.lower = -1.0;
  o.upper = 1.0;
  o.max_evals = 500;
  const auto r = nelder_mead(f, Vector::Zero(2), o);
  CHECK(r.x(0) <= 0.5);
  CHECK(r.x(0) > 0.45);
  CHECK(std::abs(r.x(1)) < 1e-3);
}

TEST_CASE("k-fold partition") {
  const auto folds = kfold_partition(133, 10, 4);
  REQUIRE(folds.size() == 10);
  std::set<Eigen::Index> all;
  for (const auto& f : folds) {
    CHECK((f.size() == 13 || f.size() == 14));
    all.insert(f.begin(), f.end());
  }
  CHECK(all.size() == 133);
  CHECK(kfold_partition(133, 10, 4) == folds);
  CHECK(kfold_partition(133, 10, 5) != folds);
  CHECK_THROWS_AS(kfold_partition(10, 1, 0), InputError);
  CHECK_THROWS_AS(kfold_partition(3, 5, 0), InputError);
}

TEST_CASE("test MLPD is the expected Gaussian log density") {
  std::vector<PredictiveResult> p(2);
  p[0].mean_y = 0.0;
  p[0].var_y = 1.0;
  p[1].mean_y = 1.0;
  p[1].var_y = 4.0;
  Vector m(2), s(2);
  m << 0.0, 2.0;
  s << 0.0, 1.0;
  const double e0 = log_normal_pdf(0.0, 0.0, 1.0);
  const double e1 = log_normal_pdf(2.0, 1.0, 4.0) - 1.0 / 8.0;
  CHECK(test_mlpd(p, m, s) == doctest::Approx(0.5 * (e0 + e1)));
  CHECK_THROWS_AS(test_mlpd(p, Vector::Zero(3), Vector::Zero(3)), InputError);
}

TEST_CASE("GP hyperparameter search improves on the heuristic start") {
  const Dataset d = generate_sim1(80, 1, 10).train;
  HyperConfig cfg;
  cfg.starts = 2;
  const FittedModel m = optimize_hyperparams(d.X, d.y, ModelKind::gp, cfg);
  const HyperParams h = heuristic_params(d.X, d.y, ModelKind::gp, false);
  const ExactGPModel start(d.X, d.y, h.f, h.log_noise_variance);
  CHECK(m.log_evidence > start.log_marginal());
  CHECK(m.converged);
  CHECK(m.evaluations > 0);
  CHECK(m.predict(d.X.topRows(3)).size() == 3);
}

TEST_CASE("EP(n) hyperparameter search converges and is deterministic") {
  const Dataset d = generate_sim1(60, 2, 10).train;
  HyperConfig cfg;
  cfg.starts = 1;
  cfg.max_evals = 120;
  const FittedModel a = optimize_hyperparams(d.X, d.y, ModelKind::ep_n, cfg);
  const FittedModel b = optimize_hyperparams(d.X, d.y, ModelKind::ep_n, cfg);
  CHECK(a.converged);
  CHECK(a.log_evidence == b.log_evidence);
  const FittedModel g = optimize_hyperparams(d.X, d.y, ModelKind::gp, cfg);
  CHECK(a.log_evidence > g.log_evidence);
}

TEST_CASE("k-fold MLPD bookkeeping and determinism") {
  const Dataset d = generate_sim1(60, 3, 10).train;
  HyperConfig cfg;
  cfg.starts = 1;
  const EvalReport a = kfold_mlpd(d, 5, ModelKind::gp, cfg, 11);
  const EvalReport b = kfold_mlpd(d, 5, ModelKind::gp, cfg, 11);
  CHECK(a.fold_mlpd == b.fold_mlpd);
  CHECK_FALSE(a.partial);
  double s = 0.0;
  for (double v : a.point_log_density) s += v;
  CHECK(a.mlpd == doctest::Approx(s / 60.0));
  const double xmin = d.X.minCoeff();
  const EvalReport c = kfold_evaluate(d, 4, ModelKind::gp, 1, [&](const Dataset&, const Dataset& te, int&) {
    if (te.X.minCoeff() == xmin) throw NumericalError("fold failure");
    return std::vector<double>(static_cast<std::size_t>(te.size()), -1.0);
  });
  CHECK(c.partial);
  CHECK(std::count(c.fold_failed.begin(), c.fold_failed.end(), true) == 1);
  CHECK(c.mlpd == doctest::Approx(-1.0));
}
