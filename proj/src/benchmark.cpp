#include "hetgp/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "hetgp/errors.hpp"
#include "hetgp/parallel.hpp"

namespace hetgp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void summarize(MethodResult& r) {
  double s = 0.0, s2 = 0.0, sn = 0.0;
  int c = 0, cn = 0;
  for (std::size_t i = 0; i < r.mlpd.size(); ++i) {
    if (r.failed[i] || !std::isfinite(r.mlpd[i])) continue;
    s += r.mlpd[i];
    s2 += r.mlpd[i] * r.mlpd[i];
    ++c;
    if (i < r.mlpd_noiseless.size() && std::isfinite(r.mlpd_noiseless[i])) {
      sn += r.mlpd_noiseless[i];
      ++cn;
    }
  }
  r.failures = static_cast<int>(r.mlpd.size()) - c;
  r.mean = c > 0 ? s / c : kNaN;
  r.sd = c > 1 ? std::sqrt(std::max(0.0, (s2 - c * r.mean * r.mean) / (c - 1))) : 0.0;
  r.mean_noiseless = cn > 0 ? sn / cn : kNaN;
}

// Cold-start EP iterations at fixed hyperparameters; -1 when EP fails or does not converge.
int cold_iterations(const Dataset& d, ModelKind kind, const HyperParams& hp, const EPConfig& ep) {
  try {
    const EPState st = run_ep(d.X, d.y, hp, kind, ep);
    return st.converged ? st.iterations : -1;
  } catch (const NumericalError&) {
    return -1;
  }
}

struct RepOutcome {
  double mlpd = kNaN;
  double mlpd_noiseless = kNaN;
  bool failed = true;
  int ep_iterations = 0;
  int coupled = 0;
  int factorized = 0;
  double seconds = 0.0;
};

std::vector<RepOutcome> run_sim_rep(const BenchmarkConfig& cfg, std::uint64_t seed) {
  const std::size_t n = cfg.n_train > 0 ? cfg.n_train : (cfg.suite == Suite::sim1 ? 200 : 150);
  const SimPair data = cfg.suite == Suite::sim1 ? generate_sim1(n, seed, cfg.n_test)
                                                : generate_sim2(n, seed, cfg.n_test);
  const Truth& truth = *data.test.truth;
  const Vector zero = Vector::Zero(truth.mean.size());
  HyperConfig hc = cfg.hyper;
  hc.seed = seed;

  std::map<ModelKind, std::optional<FittedModel>> fits;
  auto fit = [&](ModelKind kind) -> const FittedModel& {
    auto& slot = fits[kind];
    if (!slot) slot = optimize_hyperparams(data.train.X, data.train.y, kind, hc);
    return *slot;
  };

  std::vector<RepOutcome> out(cfg.methods.size());
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    const Method m = cfg.methods[k];
    RepOutcome& o = out[k];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const FittedModel& model = fit(hyper_kind(m));
      if (is_mc(m)) {
        if (!model.ep) throw InputError("EP-MC needs an EP tier");
        ChainConfig cc = cfg.chain;
        cc.seed = seed;
        const ChainOutput chain = ess_sample(data.train.X, data.train.y, model.kind, model.params, cc);
        const McPredictive pred = mc_predictive(chain, data.train.X, model.params, data.test.X);
        double a = 0.0, b = 0.0;
        for (Eigen::Index j = 0; j < zero.size(); ++j) {
          a += pred.expected_log_density(j, truth.mean(j), 0.0);
          b += pred.expected_log_density(j, truth.mean(j), truth.noise_sd(j));
        }
        o.mlpd = b / static_cast<double>(zero.size());
        o.mlpd_noiseless = a / static_cast<double>(zero.size());
      } else {
        if (model.ep && !model.converged) throw NumericalError("EP did not converge at the optimum");
        const auto preds = model.predict(data.test.X);
        o.mlpd = test_mlpd(preds, truth.mean, truth.noise_sd);
        o.mlpd_noiseless = test_mlpd(preds, truth.mean, zero);
        if (model.ep) o.ep_iterations = model.ep->iterations;
        if (m == Method::ep_mn && cfg.count_iterations) {
          o.coupled = cold_iterations(data.train, ModelKind::ep_mn, model.params, cfg.hyper.ep);
          o.factorized =
              cold_iterations(data.train, ModelKind::ep_mn_factorized, model.params, cfg.hyper.ep);
        }
      }
      o.failed = !std::isfinite(o.mlpd);
    } catch (const std::runtime_error&) {
      o.failed = true;
    }
    o.seconds = seconds_since(t0);
  }
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::gp: return "gp";
    case Method::ep_n: return "ep-n";
    case Method::ep_mn: return "ep-mn";
    case Method::epmc_n: return "epmc-n";
    case Method::epmc_mn: return "epmc-mn";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::gp, Method::ep_n, Method::ep_mn, Method::epmc_n, Method::epmc_mn}) {
    if (name == to_string(m)) return m;
  }
  throw InputError("unknown method '" + std::string(name) + "'");
}

std::vector<Method> parse_methods(std::string_view list) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const Method m = parse_method(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw InputError("no methods given");
  return out;
}

ModelKind hyper_kind(Method m) {
  switch (m) {
    case Method::gp: return ModelKind::gp;
    case Method::ep_n:
    case Method::epmc_n: return ModelKind::ep_n;
    case Method::ep_mn:
    case Method::epmc_mn: return ModelKind::ep_mn;
  }
  return ModelKind::gp;
}

std::string to_string(Suite s) {
  switch (s) {
    case Suite::sim1: return "sim1";
    case Suite::sim2: return "sim2";
    case Suite::motorcycle: return "motorcycle";
  }
  return "unknown";
}

Suite parse_suite(std::string_view name) {
  for (Suite s : {Suite::sim1, Suite::sim2, Suite::motorcycle}) {
    if (name == to_string(s)) return s;
  }
  throw InputError("unknown suite '" + std::string(name) + "'");
}

const MethodResult& BenchmarkReport::result(Method m) const {
  for (const auto& r : results) {
    if (r.method == m) return r;
  }
  throw InputError("method " + to_string(m) + " not in report");
}

int BenchmarkReport::wins(Method a, Method b) const {
  const MethodResult& ra = result(a);
  const MethodResult& rb = result(b);
  int w = 0;
  for (std::size_t i = 0; i < ra.mlpd.size() && i < rb.mlpd.size(); ++i) {
    if (!ra.failed[i] && !rb.failed[i] && ra.mlpd[i] > rb.mlpd[i]) ++w;
  }
  return w;
}

EvalReport kfold_mlpd_mc(const Dataset& data, int k, ModelKind kind, const HyperConfig& cfg,
                         const ChainConfig& chain, std::uint64_t seed) {
  if (!is_ep(kind)) throw InputError("EP-MC needs an EP model kind");
  return kfold_evaluate(data, k, kind, seed, [&](const Dataset& tr, const Dataset& te, int& iters) {
    const FittedModel m = optimize_hyperparams(tr.X, tr.y, kind, cfg);
    iters = m.ep->iterations;
    const ChainOutput ch = ess_sample(tr.X, tr.y, kind, m.params, chain);
    const McPredictive pred = mc_predictive(ch, tr.X, m.params, te.X);
    std::vector<double> d(static_cast<std::size_t>(te.size()));
    for (Eigen::Index j = 0; j < te.size(); ++j) {
      d[static_cast<std::size_t>(j)] = pred.log_density(j, te.y(j));
    }
    return d;
  });
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.methods.empty()) throw InputError("benchmark: no methods");
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkReport rep;
  rep.suite = cfg.suite;
  rep.seed = cfg.seed;
  rep.results.resize(cfg.methods.size());
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) rep.results[k].method = cfg.methods[k];

  if (cfg.suite == Suite::motorcycle) {
    rep.folds = cfg.folds;
    rep.standardized = cfg.standardize;
    const Dataset raw = motorcycle();
    Dataset data = raw;
    double log_jac = 0.0;
    if (cfg.standardize) {
      auto [d, tr] = standardize(raw);
      data = std::move(d);
      log_jac = tr.log_jacobian();
    }
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      const Method m = cfg.methods[k];
      HyperConfig hc = cfg.hyper;
      hc.seed = cfg.seed;
      ChainConfig cc = cfg.chain;
      cc.seed = cfg.seed;
      const EvalReport ev = is_mc(m) ? kfold_mlpd_mc(data, cfg.folds, hyper_kind(m), hc, cc, cfg.seed)
                                     : kfold_mlpd(data, cfg.folds, hyper_kind(m), hc, cfg.seed);
      MethodResult& r = rep.results[k];
      r.mlpd = ev.fold_mlpd;
      r.failed = ev.fold_failed;
      r.ep_iterations = ev.ep_iterations;
      r.seconds = {ev.seconds};
      r.pooled = ev.mlpd;
      r.pooled_original = ev.mlpd + log_jac;
      summarize(r);
      rep.partial = rep.partial || ev.partial;
    }
  } else {
    if (cfg.repetitions < 1) throw InputError("benchmark: need at least one repetition");
    rep.repetitions = cfg.repetitions;
    const auto reps = static_cast<std::size_t>(cfg.repetitions);
    for (std::size_t r = 0; r < reps; ++r) rep.rep_seeds.push_back(cfg.seed + r);
    std::vector<std::vector<RepOutcome>> outcomes(reps);
    parallel_for(reps, [&](std::size_t r) { outcomes[r] = run_sim_rep(cfg, rep.rep_seeds[r]); },
                 worker_count());
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      MethodResult& res = rep.results[k];
      for (std::size_t r = 0; r < reps; ++r) {
        const RepOutcome& o = outcomes[r][k];
        res.mlpd.push_back(o.mlpd);
        res.mlpd_noiseless.push_back(o.mlpd_noiseless);
        res.failed.push_back(o.failed);
        res.ep_iterations.push_back(o.ep_iterations);
        res.seconds.push_back(o.seconds);
        if (res.method == Method::ep_mn && cfg.count_iterations) {
          res.coupled_iterations.push_back(o.coupled);
          res.factorized_iterations.push_back(o.factorized);
        }
      }
      summarize(res);
      rep.partial = rep.partial || res.failures > 0;
    }
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

}  // namespace hetgp
