#include "hetgp/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>

#include <CLI11.hpp>

#include "hetgp/artifact.hpp"
#include "hetgp/benchmark.hpp"
#include "hetgp/errors.hpp"
#include "hetgp/mcmc.hpp"
#include "hetgp/report.hpp"

namespace hetgp {

namespace {

constexpr const char* kBuiltinMotorcycle = "builtin:motorcycle";

struct DataArgs {
  std::string data;
  std::vector<std::string> x_cols;
  std::string y_col;
  bool no_header = false;
  bool no_standardize = false;
};

struct FitArgs {
  DataArgs d;
  std::string model = "gp";
  bool ard = false;
  std::uint64_t seed = 0;
  std::optional<double> damping;
  std::optional<int> max_iter;
  int starts = 3;
  std::string out = "model.json";
};

struct PredictArgs {
  std::string model_file;
  std::string data;
  std::vector<std::string> x_cols;
  std::string y_col;
  bool with_density = false;
  bool no_header = false;
  std::string out;
};

struct EvalArgs {
  DataArgs d;
  std::string model = "gp";
  bool ard = false;
  int folds = 10;
  std::uint64_t seed = 0;
  int starts = 3;
  std::string out;
};

struct SimArgs {
  std::string suite;
  std::size_t n = 0;
  std::size_t n_test = 1000;
  std::uint64_t seed = 0;
  std::string prefix;
};

struct BenchArgs {
  std::string suite;
  std::string methods = "gp,ep-n,ep-mn";
  int repetitions = 20;
  std::uint64_t seed = 0;
  int folds = 10;
  int starts = 1;
  bool no_standardize = false;
  std::size_t n_train = 0;
  int chain_samples = 20000;
  int chain_burnin = 5000;
  int chain_thin = 2;
  std::string out;
};

struct McmcArgs {
  std::string model_file;
  int samples = 20000;
  int burnin = 5000;
  int thin = 2;
  std::uint64_t seed = 0;
  std::string out = "chain.csv";
};

void add_data_options(CLI::App* sub, DataArgs& d) {
  sub->add_option("--data", d.data, "CSV file, or builtin:motorcycle")->required();
  sub->add_option("--x-cols", d.x_cols, "input columns (names, or 0-based indices without header)")
      ->delimiter(',');
  sub->add_option("--y-col", d.y_col, "target column")->required();
  sub->add_flag("--no-header", d.no_header, "the CSV has no header row");
  sub->add_flag("--no-standardize", d.no_standardize, "fit on the original scale");
}

Dataset load_data(const DataArgs& d) {
  if (d.data == kBuiltinMotorcycle) {
    Dataset ds = motorcycle();
    if ((!d.x_cols.empty() && d.x_cols != std::vector<std::string>{"times"}) ||
        (d.y_col != "accel")) {
      throw InputError("builtin:motorcycle has columns times (input) and accel (target)");
    }
    return ds;
  }
  if (d.x_cols.empty()) throw InputError("--x-cols is required");
  return load_csv(d.data, {d.x_cols, d.y_col, !d.no_header});
}

std::vector<std::string> x_names(const DataArgs& d) {
  return d.x_cols.empty() ? std::vector<std::string>{"times"} : d.x_cols;
}

std::pair<Dataset, Standardization> prepare(const Dataset& raw, bool no_standardize) {
  if (no_standardize) return {raw, Standardization::identity(raw.dim())};
  return standardize(raw);
}

void print_params(std::ostream& out, ModelKind kind, const HyperParams& hp, Eigen::Index dim,
                  bool ard) {
  const Vector p = pack_params(kind, hp, ard);
  const auto names = parameter_names(kind, dim, ard);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << "  " << std::left << std::setw(28) << names[i] << std::right
        << p(static_cast<Eigen::Index>(i)) << "\n";
  }
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const ModelKind kind = parse_model_kind(a.model);
  if (kind == ModelKind::ep_mn_factorized) throw InputError("ep-mn-factorized is a diagnostic mode, not fittable here");
  if (a.starts < 1) throw InputError("--starts must be at least 1");
  const Dataset raw = load_data(a.d);
  auto [data, tr] = prepare(raw, a.d.no_standardize);
  HyperConfig cfg;
  cfg.ard = a.ard;
  cfg.seed = a.seed;
  cfg.starts = a.starts;
  if (a.damping) {
    if (!(*a.damping > 0.0 && *a.damping <= 1.0)) throw InputError("--damping must be in (0, 1]");
    cfg.ep.damping = cfg.search_ep.damping = *a.damping;
  }
  if (a.max_iter) {
    if (*a.max_iter < 1) throw InputError("--max-iter must be positive");
    cfg.ep.max_iter = cfg.search_ep.max_iter = *a.max_iter;
  }
  const FittedModel m = optimize_hyperparams(data.X, data.y, kind, cfg);
  save_artifact(a.out, make_artifact(m, tr, a.ard, x_names(a.d), a.d.y_col));

  out << "model " << to_string(kind) << "  n=" << data.size() << "  dim=" << data.dim()
      << "  standardized=" << (tr.is_identity() ? "no" : "yes") << "\n";
  out << "log evidence " << m.log_evidence << "  evaluations " << m.evaluations << " ("
      << m.failed_evaluations << " failed)\n";
  if (m.ep) {
    out << "EP " << (m.converged ? "converged" : "did NOT converge") << " in " << m.ep->iterations
        << " iterations\n";
  }
  print_params(out, kind, m.params, data.dim(), a.ard);
  out << "artifact written to " << a.out << "\n";
  if (!m.converged) {
    err << "warning: EP did not converge; the artifact is flagged\n";
    return 2;
  }
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  if (a.with_density && a.y_col.empty()) throw InputError("--with-density needs --y-col");
  const ModelArtifact art = load_artifact(a.model_file);
  int code = 0;
  if (!art.fingerprint_matches()) {
    err << "warning: training data fingerprint mismatch; the artifact may be corrupted\n";
  }
  if (!art.converged) {
    err << "warning: the model was saved from a non-converged EP run\n";
    code = 2;
  }
  const std::vector<std::string> cols = a.x_cols.empty() ? art.x_columns : a.x_cols;
  if (static_cast<Eigen::Index>(cols.size()) != art.X.cols()) {
    throw SchemaError("the model expects " + std::to_string(art.X.cols()) + " input columns");
  }
  Dataset ds;
  if (a.data == kBuiltinMotorcycle) {
    ds = motorcycle();
  } else {
    ds = load_csv(a.data, {cols, a.y_col, !a.no_header});
  }
  const FittedModel m = art.restore();
  const auto preds = predict_original(m, art.standardization, ds.X);

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw InputError("cannot write '" + a.out + "'");
  }
  std::ostream& o = a.out.empty() ? out : file;
  o << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : cols) o << c << ",";
  o << "mean_y,var_y,lower95,upper95" << (a.with_density ? ",log_density" : "") << "\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) o << ds.X(r, j) << ",";
    const double sd = std::sqrt(preds[i].var_y);
    o << preds[i].mean_y << "," << preds[i].var_y << "," << preds[i].mean_y - 1.96 * sd << ","
      << preds[i].mean_y + 1.96 * sd;
    if (a.with_density) o << "," << predictive_log_density(preds[i], ds.y(r));
    o << "\n";
  }
  return code;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const ModelKind kind = parse_model_kind(a.model);
  if (kind == ModelKind::ep_mn_factorized) throw InputError("ep-mn-factorized is a diagnostic mode");
  if (a.folds < 2) throw InputError("--folds must be at least 2");
  if (a.starts < 1) throw InputError("--starts must be at least 1");
  const Dataset raw = load_data(a.d);
  auto [data, tr] = prepare(raw, a.d.no_standardize);
  HyperConfig cfg;
  cfg.ard = a.ard;
  cfg.seed = a.seed;
  cfg.starts = a.starts;
  const EvalReport rep = kfold_mlpd(data, a.folds, kind, cfg, a.seed);
  out << "model " << to_string(kind) << "  " << a.folds << "-fold CV  seed " << a.seed << "\n";
  out << "MLPD " << rep.mlpd;
  if (!tr.is_identity()) out << " (standardized scale); " << rep.mlpd + tr.log_jacobian() << " (original scale)";
  out << "\nfolds:";
  for (std::size_t f = 0; f < rep.fold_mlpd.size(); ++f) {
    out << " " << (rep.fold_failed[f] ? std::string("failed") : std::to_string(rep.fold_mlpd[f]));
  }
  out << "\n";
  if (!a.out.empty()) {
    nlohmann::json j = to_json(rep, a.seed, a.folds, tr.log_jacobian());
    j["data"] = a.d.data;
    j["standardized"] = !tr.is_identity();
    write_json(a.out, j);
    out << "report written to " << a.out << "\n";
  }
  if (rep.partial) {
    err << "warning: some folds failed\n";
    return 2;
  }
  return 0;
}

int cmd_simulate(const SimArgs& a, std::ostream& out, std::ostream&) {
  const Suite s = parse_suite(a.suite);
  if (s == Suite::motorcycle) throw InputError("simulate supports sim1 and sim2");
  if (a.prefix.empty()) throw InputError("--out-prefix is required");
  const std::size_t n = a.n > 0 ? a.n : (s == Suite::sim1 ? 200 : 150);
  const SimPair p = s == Suite::sim1 ? generate_sim1(n, a.seed, a.n_test) : generate_sim2(n, a.seed, a.n_test);
  write_csv(a.prefix + "_train.csv", p.train);
  write_csv(a.prefix + "_test.csv", p.test);
  out << "wrote " << a.prefix << "_train.csv (" << p.train.size() << " rows) and " << a.prefix
      << "_test.csv (" << p.test.size() << " rows)\n";
  return 0;
}

int cmd_benchmark(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchmarkConfig cfg;
  cfg.suite = parse_suite(a.suite);
  cfg.methods = parse_methods(a.methods);
  if (a.repetitions < 1) throw InputError("--repetitions must be at least 1");
  if (a.folds < 2) throw InputError("--folds must be at least 2");
  if (a.starts < 1) throw InputError("--starts must be at least 1");
  if (a.chain_samples < 1 || a.chain_burnin < 0 || a.chain_thin < 1) throw InputError("bad chain settings");
  cfg.repetitions = a.repetitions;
  cfg.seed = a.seed;
  cfg.folds = a.folds;
  cfg.standardize = !a.no_standardize;
  cfg.n_train = a.n_train;
  cfg.hyper.starts = a.starts;
  cfg.chain.n_samples = a.chain_samples;
  cfg.chain.n_burnin = a.chain_burnin;
  cfg.chain.thinning = a.chain_thin;
  const BenchmarkReport rep = run_benchmark(cfg);

  out << "suite " << to_string(rep.suite) << "  seed " << rep.seed;
  if (rep.suite == Suite::motorcycle) {
    out << "  " << rep.folds << "-fold CV" << (rep.standardized ? " (standardized scale)" : "") << "\n";
  } else {
    out << "  " << rep.repetitions << " repetitions\n";
  }
  out << std::left << std::setw(10) << "method" << std::right << std::setw(12) << "MLPD"
      << std::setw(10) << "sd" << std::setw(10) << "failed" << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rep.results) {
    const double shown = rep.suite == Suite::motorcycle ? r.pooled : r.mean;
    out << std::left << std::setw(10) << to_string(r.method) << std::right << std::setw(12) << shown
        << std::setw(10) << r.sd << std::setw(10) << r.failures << "\n";
  }
  out << std::defaultfloat << "seconds " << rep.seconds << "\n";
  if (!a.out.empty()) {
    write_json(a.out, to_json(rep));
    out << "report written to " << a.out << "\n";
  }
  if (rep.partial) {
    err << "warning: some repetitions or folds failed\n";
    return 2;
  }
  return 0;
}

int cmd_mcmc(const McmcArgs& a, std::ostream& out, std::ostream& err) {
  if (a.samples < 1 || a.burnin < 0 || a.thin < 1) throw InputError("bad chain settings");
  const ModelArtifact art = load_artifact(a.model_file);
  if (!is_ep(art.kind) || art.kind == ModelKind::ep_mn_factorized) {
    throw InputError("mcmc needs an ep-n or ep-mn model");
  }
  ChainConfig cc;
  cc.n_samples = a.samples;
  cc.n_burnin = a.burnin;
  cc.thinning = a.thin;
  cc.seed = a.seed;
  const ChainOutput ch = ess_sample(art.X, art.y, art.kind, art.params, cc);

  std::ofstream file(a.out);
  if (!file) throw InputError("cannot write '" + a.out + "'");
  file << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto n = static_cast<Eigen::Index>(ch.n);
  file << "draw";
  if (art.kind == ModelKind::ep_n) {
    for (Eigen::Index i = 0; i < n; ++i) file << ",f" << i;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) file << ",ftilde" << i;
    for (Eigen::Index i = 0; i < n; ++i) file << ",phi" << i;
  }
  for (Eigen::Index i = 0; i < n; ++i) file << ",theta" << i;
  file << "\n";
  for (Eigen::Index d = 0; d < ch.v.rows(); ++d) {
    file << d;
    for (Eigen::Index i = 0; i < ch.v.cols(); ++i) file << "," << ch.v(d, i);
    for (Eigen::Index i = 0; i < ch.theta.cols(); ++i) file << "," << ch.theta(d, i);
    file << "\n";
  }

  const FittedModel m = art.restore();
  const DiscrepancyReport dr = compare_to_ep(ch, *m.ep);
  out << "draws " << ch.draws() << "  mean slice shrinks " << ch.mean_shrinks_v << " (v), "
      << ch.mean_shrinks_theta << " (theta)\n";
  out << "min ESS " << dr.min_ess << "\n";
  out << "EP vs chain: max |mean diff|/sd " << dr.max_mean_z << "  sd ratio range [" << dr.min_sd_ratio
      << ", " << dr.max_sd_ratio << "]\n";
  out << "chain written to " << a.out << "\n";
  if (!dr.reliable) {
    err << "warning: some latent has ESS < 100; the comparison is unreliable\n";
    return 2;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heteroscedastic and nonstationary GP regression with expectation propagation", "hetgp"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* s_fit = app.add_subcommand("fit", "Optimize hyperparameters and write a model artifact");
  add_data_options(s_fit, fit.d);
  s_fit->add_option("--model", fit.model, "gp | ep-n | ep-mn")->capture_default_str();
  s_fit->add_flag("--ard", fit.ard, "one length-scale per input dimension for f");
  s_fit->add_option("--seed", fit.seed)->capture_default_str();
  s_fit->add_option("--damping", fit.damping, "EP damping in (0, 1]");
  s_fit->add_option("--max-iter", fit.max_iter, "EP iteration limit");
  s_fit->add_option("--starts", fit.starts, "Nelder-Mead starts")->capture_default_str();
  s_fit->add_option("--out", fit.out, "artifact path")->capture_default_str();

  PredictArgs pr;
  auto* s_pr = app.add_subcommand("predict", "Predictive mean, variance and 95% interval");
  s_pr->add_option("--model-file", pr.model_file)->required();
  s_pr->add_option("--data", pr.data, "CSV of inputs, or builtin:motorcycle")->required();
  s_pr->add_option("--x-cols", pr.x_cols, "input columns (default: those used for fitting)")->delimiter(',');
  s_pr->add_option("--y-col", pr.y_col, "target column, for --with-density");
  s_pr->add_flag("--with-density", pr.with_density, "add the log predictive density of y");
  s_pr->add_flag("--no-header", pr.no_header);
  s_pr->add_option("--out", pr.out, "CSV path (default: standard output)");

  EvalArgs ev;
  auto* s_ev = app.add_subcommand("eval", "k-fold cross-validated MLPD");
  add_data_options(s_ev, ev.d);
  s_ev->add_option("--model", ev.model)->capture_default_str();
  s_ev->add_flag("--ard", ev.ard);
  s_ev->add_option("--folds", ev.folds)->capture_default_str();
  s_ev->add_option("--seed", ev.seed)->capture_default_str();
  s_ev->add_option("--starts", ev.starts)->capture_default_str();
  s_ev->add_option("--out", ev.out, "JSON report path");

  SimArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Write train and test CSVs of a simulated suite");
  s_sim->add_option("--suite", sim.suite, "sim1 | sim2")->required();
  s_sim->add_option("--n", sim.n, "training points (default 200 for sim1, 150 for sim2)");
  s_sim->add_option("--n-test", sim.n_test)->capture_default_str();
  s_sim->add_option("--seed", sim.seed)->capture_default_str();
  s_sim->add_option("--out-prefix", sim.prefix)->required();

  BenchArgs be;
  auto* s_be = app.add_subcommand("benchmark", "MLPD table for a suite and list of methods");
  s_be->add_option("--suite", be.suite, "sim1 | sim2 | motorcycle")->required();
  s_be->add_option("--methods", be.methods, "comma list of gp, ep-n, ep-mn, epmc-n, epmc-mn")
      ->capture_default_str();
  s_be->add_option("--repetitions", be.repetitions)->capture_default_str();
  s_be->add_option("--seed", be.seed)->capture_default_str();
  s_be->add_option("--folds", be.folds)->capture_default_str();
  s_be->add_option("--starts", be.starts)->capture_default_str();
  s_be->add_flag("--no-standardize", be.no_standardize, "motorcycle on the original scale");
  s_be->add_option("--n-train", be.n_train, "training points for simulated suites");
  s_be->add_option("--chain-samples", be.chain_samples)->capture_default_str();
  s_be->add_option("--chain-burnin", be.chain_burnin)->capture_default_str();
  s_be->add_option("--chain-thin", be.chain_thin)->capture_default_str();
  s_be->add_option("--out", be.out, "JSON report path");

  McmcArgs mc;
  auto* s_mc = app.add_subcommand("mcmc", "Elliptical slice chain at an artifact's hyperparameters");
  s_mc->add_option("--model-file", mc.model_file)->required();
  s_mc->add_option("--samples", mc.samples)->capture_default_str();
  s_mc->add_option("--burnin", mc.burnin)->capture_default_str();
  s_mc->add_option("--thin", mc.thin)->capture_default_str();
  s_mc->add_option("--seed", mc.seed)->capture_default_str();
  s_mc->add_option("--out", mc.out, "chain CSV path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s_fit) return cmd_fit(fit, out, err);
    if (*s_pr) return cmd_predict(pr, out, err);
    if (*s_ev) return cmd_eval(ev, out, err);
    if (*s_sim) return cmd_simulate(sim, out, err);
    if (*s_be) return cmd_benchmark(be, out, err);
    if (*s_mc) return cmd_mcmc(mc, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    err << "failed: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace hetgp
