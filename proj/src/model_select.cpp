#include "hetgp/model_select.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "hetgp/errors.hpp"
#include "hetgp/nelder_mead.hpp"
#include "hetgp/parallel.hpp"

namespace hetgp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Index ls_count(Eigen::Index dim, bool ard) { return ard ? dim : 1; }

double variance(const Vector& y) {
  if (y.size() < 2) return 1.0;
  const double m = y.mean();
  const double v = (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
  return v > 0.0 ? v : 1.0;
}

std::vector<double> range_lengthscales(const Matrix& X, bool ard) {
  std::vector<double> out;
  if (ard) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double r = X.col(j).maxCoeff() - X.col(j).minCoeff();
      out.push_back(std::log(r > 0.0 ? 0.5 * r : 1.0));
    }
  } else {
    double r = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      r = std::max(r, X.col(j).maxCoeff() - X.col(j).minCoeff());
    }
    out.push_back(std::log(r > 0.0 ? 0.5 * r : 1.0));
  }
  return out;
}

double mean_log_ls(const KernelParams& k) {
  return std::accumulate(k.log_lengthscales.begin(), k.log_lengthscales.end(), 0.0) /
         static_cast<double>(k.log_lengthscales.size());
}

}  // namespace

std::size_t free_parameter_count(ModelKind kind, Eigen::Index dim, bool ard) {
  const auto l = static_cast<std::size_t>(ls_count(dim, ard));
  switch (kind) {
    case ModelKind::gp: return l + 2;
    case ModelKind::ep_n: return l + 4;
    case ModelKind::ep_mn:
    case ModelKind::ep_mn_factorized: return l + 6;
  }
  return 0;
}

std::vector<std::string> parameter_names(ModelKind kind, Eigen::Index dim, bool ard) {
  std::vector<std::string> names;
  const Eigen::Index l = ls_count(dim, ard);
  auto add_ls = [&](const std::string& p) {
    for (Eigen::Index j = 0; j < l; ++j) {
      names.push_back(p + ".log_lengthscale" + (l > 1 ? "[" + std::to_string(j) + "]" : ""));
    }
  };
  auto add_latent = [&](const std::string& p) {
    names.push_back(p + ".log_magnitude");
    names.push_back(p + ".log_lengthscale");
    names.push_back(p + ".mean");
  };
  switch (kind) {
    case ModelKind::gp:
      names.push_back("f.log_magnitude");
      add_ls("f");
      names.push_back("log_noise_variance");
      break;
    case ModelKind::ep_n:
      names.push_back("f.log_magnitude");
      add_ls("f");
      add_latent("theta");
      break;
    case ModelKind::ep_mn:
    case ModelKind::ep_mn_factorized:
      add_ls("f");
      add_latent("phi");
      add_latent("theta");
      break;
  }
  return names;
}

Vector pack_params(ModelKind kind, const HyperParams& hp, bool ard) {
  std::vector<double> v;
  auto add_ls = [&](const KernelParams& k) {
    if (ard) {
      v.insert(v.end(), k.log_lengthscales.begin(), k.log_lengthscales.end());
    } else {
      v.push_back(mean_log_ls(k));
    }
  };
  auto add_latent = [&](const KernelParams& k) {
    v.push_back(k.log_magnitude);
    v.push_back(mean_log_ls(k));
    v.push_back(k.constant_mean);
  };
  switch (kind) {
    case ModelKind::gp:
      v.push_back(hp.f.log_magnitude);
      add_ls(hp.f);
      v.push_back(hp.log_noise_variance);
      break;
    case ModelKind::ep_n:
      v.push_back(hp.f.log_magnitude);
      add_ls(hp.f);
      add_latent(hp.theta);
      break;
    case ModelKind::ep_mn:
    case ModelKind::ep_mn_factorized:
      add_ls(hp.f);
      add_latent(hp.phi);
      add_latent(hp.theta);
      break;
  }
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

HyperParams unpack_params(ModelKind kind, const Vector& raw, Eigen::Index dim, bool ard,
                          double bound) {
  if (static_cast<std::size_t>(raw.size()) != free_parameter_count(kind, dim, ard)) {
    throw InputError("unpack_params: wrong parameter count");
  }
  const Vector v = raw.cwiseMax(-bound).cwiseMin(bound);
  const Eigen::Index l = ls_count(dim, ard);
  Eigen::Index pos = 0;
  HyperParams hp;
  auto take_ls = [&](KernelParams& k) {
    k.log_lengthscales.assign(v.data() + pos, v.data() + pos + l);
    pos += l;
  };
  auto take_latent = [&](KernelParams& k) {
    k.log_magnitude = v(pos++);
    k.log_lengthscales = {v(pos++)};
    k.constant_mean = v(pos++);
  };
  switch (kind) {
    case ModelKind::gp:
      hp.f.log_magnitude = v(pos++);
      take_ls(hp.f);
      hp.log_noise_variance = v(pos++);
      break;
    case ModelKind::ep_n:
      hp.f.log_magnitude = v(pos++);
      take_ls(hp.f);
      take_latent(hp.theta);
      break;
    case ModelKind::ep_mn:
    case ModelKind::ep_mn_factorized:
      hp.f.log_magnitude = 0.0;
      take_ls(hp.f);
      take_latent(hp.phi);
      take_latent(hp.theta);
      break;
  }
  return hp;
}

HyperParams heuristic_params(const Matrix& X, const Vector& y, ModelKind kind, bool ard) {
  const double log_var = std::log(variance(y));
  const std::vector<double> ls = range_lengthscales(X, ard);
  const double iso = range_lengthscales(X, false)[0];
  HyperParams hp;
  hp.f.log_magnitude = log_var;
  hp.f.log_lengthscales = ls;
  hp.log_noise_variance = std::log(0.1) + log_var;
  hp.theta.log_magnitude = 0.0;
  hp.theta.log_lengthscales = {iso};
  hp.theta.constant_mean = std::log(0.1) + log_var;
  hp.phi.log_magnitude = 0.0;
  hp.phi.log_lengthscales = {iso};
  hp.phi.constant_mean = log_var;
  if (has_signal_process(kind)) hp.f.log_magnitude = 0.0;
  return hp;
}

std::vector<PredictiveResult> FittedModel::predict(const Matrix& Xs) const {
  if (gp) return gp->predict(Xs);
  if (!ep) throw InputError("FittedModel has no inference state");
  return predictive_y(latent(Xs));
}

LatentPredictive FittedModel::latent(const Matrix& Xs) const {
  if (!ep) throw InputError("latent predictive needs an EP model");
  return latent_predictive(*ep, params, X, Xs);
}

FittedModel fit_fixed(const Matrix& X, const Vector& y, ModelKind kind, const HyperParams& hp,
                      const EPConfig& ep, const SiteSet* warm_start) {
  FittedModel m;
  m.kind = kind;
  m.params = hp;
  m.X = X;
  m.y = y;
  m.evaluations = 1;
  if (kind == ModelKind::gp) {
    m.gp.emplace(X, y, hp.f, hp.log_noise_variance);
    m.log_evidence = m.gp->log_marginal();
  } else {
    m.ep = run_ep(X, y, hp, kind, ep, warm_start);
    m.log_evidence = m.ep->log_z_ep;
    m.converged = m.ep->converged;
  }
  m.objective = m.log_evidence;
  return m;
}

double log_hyperprior(const Vector& packed, const HyperPrior& prior) {
  if (!prior.enabled) return 0.0;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < packed.size(); ++i) {
    lp += log_normal_pdf(packed(i), prior.mean, prior.sd * prior.sd);
  }
  return lp;
}

FittedModel optimize_hyperparams(const Matrix& X, const Vector& y, ModelKind kind,
                                 const HyperConfig& cfg) {
  if (X.rows() != y.size() || y.size() == 0) {
    throw InputError("optimize_hyperparams: X and y must have the same non-zero number of rows");
  }
  if (cfg.starts < 1) throw InputError("optimize_hyperparams: need at least one start");
  const Eigen::Index dim = X.cols();

  HyperParams init = heuristic_params(X, y, kind, cfg.ard);
  if (is_ep(kind) && cfg.init_from_gp) {
    HyperConfig gcfg = cfg;
    gcfg.starts = 1;
    const FittedModel g = optimize_hyperparams(X, y, ModelKind::gp, gcfg);
    if (has_signal_process(kind)) {
      init.phi.constant_mean = g.params.f.log_magnitude;
    } else {
      init.f.log_magnitude = g.params.f.log_magnitude;
    }
    init.f.log_lengthscales = g.params.f.log_lengthscales;
    init.theta.constant_mean = g.params.log_noise_variance;
  }
  const Vector x0 = pack_params(kind, init, cfg.ard);

  std::optional<FittedModel> best;
  int evaluations = 0;
  int failures = 0;
  long sweeps = 0;
  std::optional<SiteSet> warm;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.start_perturbation);

  auto objective = [&](const Vector& v) -> double {
    ++evaluations;
    const HyperParams hp = unpack_params(kind, v, dim, cfg.ard, cfg.bound);
    try {
      const SiteSet* ws = (cfg.warm_start_sites && warm) ? &*warm : nullptr;
      FittedModel m = fit_fixed(X, y, kind, hp, cfg.search_ep, ws);
      if (m.ep) sweeps += m.ep->iterations;
      if (!m.converged || !std::isfinite(m.log_evidence)) {
        ++failures;
        return kInf;
      }
      if (m.ep) warm = m.ep->sites;
      m.objective = m.log_evidence + log_hyperprior(v.cwiseMax(-cfg.bound).cwiseMin(cfg.bound), cfg.prior);
      const double value = -m.objective;
      if (!best || m.objective > best->objective) best = std::move(m);
      return value;
    } catch (const NumericalError&) {
      ++failures;
      return kInf;
    }
  };

  NelderMeadOptions nm;
  nm.max_evals = cfg.max_evals;
  nm.xtol = cfg.simplex_tol;
  nm.lower = -cfg.bound;
  nm.upper = cfg.bound;
  for (int s = 0; s < cfg.starts; ++s) {
    Vector start = x0;
    if (s > 0) {
      for (Eigen::Index i = 0; i < start.size(); ++i) start(i) += normal(rng);
    }
    nelder_mead(objective, start, nm);
  }
  if (!best) {
    throw OptimizationError("no hyperparameter evaluation converged (" + std::to_string(failures) +
                            " failures out of " + std::to_string(evaluations) + ")");
  }
  if (best->ep) {
    // tighten the EP fixed point at the selected hyperparameters
    const SiteSet sites = best->ep->sites;
    const double prior_term = best->objective - best->log_evidence;
    try {
      FittedModel refit = fit_fixed(X, y, kind, best->params, cfg.ep, &sites);
      refit.objective = refit.log_evidence + prior_term;
      best = std::move(refit);
    } catch (const NumericalError&) {
      best->converged = false;
    }
  }
  best->evaluations = evaluations;
  best->failed_evaluations = failures;
  best->search_ep_iterations = sweeps;
  return std::move(*best);
}

double test_mlpd(const std::vector<PredictiveResult>& preds, const Vector& true_mean,
                 const Vector& true_sd) {
  if (static_cast<Eigen::Index>(preds.size()) != true_mean.size() ||
      true_mean.size() != true_sd.size() || preds.empty()) {
    throw InputError("test_mlpd: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double v = preds[i].var_y;
    const double d = true_mean(k) - preds[i].mean_y;
    const double s = true_sd(k);
    acc += -0.5 * std::log(2.0 * std::numbers::pi * v) - (d * d + s * s) / (2.0 * v);
  }
  return acc / static_cast<double>(preds.size());
}

std::vector<std::vector<Eigen::Index>> kfold_partition(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("k-fold cross-validation needs k >= 2");
  if (n < k) throw InputError("k-fold cross-validation needs n >= k");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < perm.size(); ++i) folds[i % folds.size()].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

EvalReport kfold_evaluate(const Dataset& data, int k, ModelKind kind, std::uint64_t seed,
                          const FoldScorer& score) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto folds = kfold_partition(data.size(), k, seed);
  const auto n = static_cast<std::size_t>(data.size());

  EvalReport rep;
  rep.kind = kind;
  rep.fold_mlpd.assign(folds.size(), std::numeric_limits<double>::quiet_NaN());
  rep.fold_failed.assign(folds.size(), false);
  rep.ep_iterations.assign(folds.size(), 0);
  rep.point_log_density.assign(n, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::vector<double>> fold_dens(folds.size());
  parallel_for(folds.size(), [&](std::size_t f) {
    std::vector<bool> is_test(n, false);
    for (auto i : folds[f]) is_test[static_cast<std::size_t>(i)] = true;
    std::vector<Eigen::Index> train;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_test[i]) train.push_back(static_cast<Eigen::Index>(i));
    }
    try {
      fold_dens[f] = score(data.subset(train), data.subset(folds[f]), rep.ep_iterations[f]);
      if (fold_dens[f].size() != folds[f].size()) throw InputError("fold scorer: size mismatch");
    } catch (const std::runtime_error&) {
      rep.fold_failed[f] = true;
    }
  }, worker_count());

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (rep.fold_failed[f]) {
      rep.partial = true;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < folds[f].size(); ++j) {
      rep.point_log_density[static_cast<std::size_t>(folds[f][j])] = fold_dens[f][j];
      s += fold_dens[f][j];
    }
    rep.fold_mlpd[f] = s / static_cast<double>(folds[f].size());
    total += s;
    count += folds[f].size();
  }
  rep.mlpd = count > 0 ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

EvalReport kfold_mlpd(const Dataset& data, int k, ModelKind kind, const HyperConfig& cfg,
                      std::uint64_t seed) {
  return kfold_evaluate(data, k, kind, seed, [&](const Dataset& tr, const Dataset& te, int& iters) {
    const FittedModel m = optimize_hyperparams(tr.X, tr.y, kind, cfg);
    const auto preds = m.predict(te.X);
    std::vector<double> d(preds.size());
    for (std::size_t j = 0; j < preds.size(); ++j) {
      d[j] = predictive_log_density(preds[j], te.y(static_cast<Eigen::Index>(j)));
    }
    if (m.ep) iters = m.ep->iterations;
    return d;
  });
}

unsigned worker_count() { return thread_count(); }

}  // namespace hetgp
