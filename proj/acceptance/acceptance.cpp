// Acceptance run: one PASS/FAIL line per criterion, JSON reports in --out-dir.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "hetgp/artifact.hpp"
#include "hetgp/benchmark.hpp"
#include "hetgp/ep.hpp"
#include "hetgp/gp_exact.hpp"
#include "hetgp/predict.hpp"
#include "hetgp/quadrature.hpp"
#include "hetgp/report.hpp"

using namespace hetgp;
using nlohmann::json;

namespace {

// Pinned tolerances.
constexpr int kReps = 20;
constexpr int kOrderingWins = 18;
constexpr double kSim1Ref[3] = {0.95, 1.22, 1.23};
constexpr double kSim1Tol = 0.10;
constexpr double kSim1Minutes = 30.0;
constexpr double kSim2Ref[3] = {-1.70, -1.49, -1.47};
constexpr double kSim2Tol = 0.12;
constexpr double kMotoRef[3] = {-0.71, -0.41, -0.42};
constexpr double kMotoTol = 0.10;
constexpr double kMotoMinutes = 10.0;
constexpr int kCoupledIterLimit = 50;
constexpr double kCoupledFraction = 0.90;
constexpr std::size_t kOracleN = 50;
constexpr double kMaxMeanZ = 0.2;
constexpr double kSdRatioLo = 0.8, kSdRatioHi = 1.25;
constexpr double kMinEss = 1000.0;
constexpr double kDegenerateTol = 1e-3;
constexpr int kDegenerateGrid = 100;
constexpr int kMomentConfigs = 50;
constexpr long kMomentSamples = 10'000'000;
constexpr double kMomentSe = 3.0;
constexpr double kReconTol = 1e-12;
constexpr double kNormTol = 1e-8;
constexpr double kDoublingTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kPermTol = 1e-8;
constexpr double kPropertyMinutes = 5.0;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  int id;
  bool pass;
  std::string detail;
  json metrics;
};

std::string fmt(double v, int p = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(p) << v;
  return s.str();
}

const Method kTiers[3] = {Method::gp, Method::ep_n, Method::ep_mn};

Outcome table_criterion(int id, const BenchmarkReport& r, const double* ref, double tol, bool check_order,
                        double minutes) {
  Outcome o{id, true, "", json::object()};
  std::ostringstream d;
  for (int k = 0; k < 3; ++k) {
    const MethodResult& m = r.result(kTiers[k]);
    const double v = r.suite == Suite::motorcycle ? m.pooled : m.mean;
    const bool ok = m.failures == 0 && std::abs(v - ref[k]) <= tol;
    o.pass = o.pass && ok;
    d << to_string(kTiers[k]) << " " << fmt(v) << " (ref " << fmt(ref[k], 2) << (ok ? "" : ", out of range") << ")  ";
    o.metrics[to_string(kTiers[k])] = {{"mlpd", v}, {"reference", ref[k]}, {"failures", m.failures}, {"within", ok}};
  }
  if (check_order) {
    const int wn = r.wins(Method::ep_n, Method::gp), wm = r.wins(Method::ep_mn, Method::gp);
    const bool ok = wn >= kOrderingWins && wm >= kOrderingWins;
    o.pass = o.pass && ok;
    d << "orderings " << wn << "/" << r.repetitions << ", " << wm << "/" << r.repetitions << "  ";
    o.metrics["wins_ep_n_over_gp"] = wn;
    o.metrics["wins_ep_mn_over_gp"] = wm;
  }
  const bool fast = r.seconds <= 60.0 * minutes;
  o.pass = o.pass && fast;
  d << "time " << fmt(r.seconds, 0) << " s (limit " << fmt(60.0 * minutes, 0) << ")";
  o.metrics["seconds"] = r.seconds;
  o.detail = d.str();
  return o;
}

BenchmarkReport run_suite(Suite s, std::uint64_t seed, const std::filesystem::path& dir) {
  BenchmarkConfig cfg;
  cfg.suite = s;
  cfg.seed = seed;
  cfg.repetitions = kReps;
  cfg.count_iterations = s != Suite::motorcycle;
  const BenchmarkReport r = run_benchmark(cfg);
  write_json((dir / (to_string(s) + ".json")).string(), to_json(r));
  return r;
}

Outcome convergence_criterion(const std::vector<const BenchmarkReport*>& reps, int max_iter) {
  int fits = 0, fast = 0, more = 0, fewer = 0, compared = 0;
  long coupled_sum = 0, factorized_sum = 0;
  for (const auto* r : reps) {
    const MethodResult& m = r->result(Method::ep_mn);
    for (std::size_t i = 0; i < m.coupled_iterations.size(); ++i) {
      const int c = m.coupled_iterations[i];
      const int f = m.factorized_iterations[i] < 0 ? max_iter + 1 : m.factorized_iterations[i];
      ++fits;
      if (c >= 0 && c < kCoupledIterLimit) ++fast;
      if (c >= 0) {
        ++compared;
        if (f > c) ++more;
        if (f < c) ++fewer;
        coupled_sum += c;
        factorized_sum += f;
      }
    }
  }
  const double frac = fits ? static_cast<double>(fast) / fits : 0.0;
  // factorized: never fewer iterations on an instance, strictly more in total
  const bool pass = fits > 0 && frac >= kCoupledFraction && compared > 0 && fewer == 0 && factorized_sum > coupled_sum;
  std::ostringstream d;
  d << "coupled < " << kCoupledIterLimit << " iterations in " << fast << "/" << fits << " fits ("
    << fmt(100.0 * frac, 1) << "%, need " << fmt(100.0 * kCoupledFraction, 0)
    << "%); factorized more on " << more << ", fewer on " << fewer << " of " << compared << " instances; mean iterations "
    << fmt(compared ? double(coupled_sum) / compared : 0.0, 1) << " vs "
    << fmt(compared ? double(factorized_sum) / compared : 0.0, 1);
  return {4, pass, d.str(),
          {{"fits", fits}, {"coupled_under_limit", fast}, {"factorized_more", more}, {"factorized_fewer", fewer}, {"compared", compared},
           {"mean_coupled", compared ? double(coupled_sum) / compared : 0.0},
           {"mean_factorized", compared ? double(factorized_sum) / compared : 0.0}}};
}

Outcome mcmc_criterion(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const Dataset d = generate_sim1(kOracleN, seed, 10).train;
  HyperConfig hc;
  hc.seed = seed;
  json metrics = json::object();
  bool pass = true;
  std::ostringstream det;
  for (ModelKind kind : {ModelKind::ep_n, ModelKind::ep_mn}) {
    const FittedModel m = optimize_hyperparams(d.X, d.y, kind, hc);
    ChainConfig cc;
    cc.n_samples = 240000;
    cc.n_burnin = 10000;
    cc.thinning = 4;
    cc.seed = seed + 1;
    const ChainOutput ch = ess_sample(d.X, d.y, kind, m.params, cc);
    const DiscrepancyReport r = compare_to_ep(ch, *m.ep);
    const bool ok = m.converged && r.max_mean_z < kMaxMeanZ && r.min_sd_ratio >= kSdRatioLo &&
                    r.max_sd_ratio <= kSdRatioHi && r.min_ess > kMinEss;
    pass = pass && ok;
    det << to_string(kind) << ": max z " << fmt(r.max_mean_z) << ", sd ratio [" << fmt(r.min_sd_ratio) << ", "
        << fmt(r.max_sd_ratio) << "], min ESS " << fmt(r.min_ess, 0) << "  ";
    metrics[to_string(kind)] = {{"max_mean_z", r.max_mean_z}, {"min_sd_ratio", r.min_sd_ratio},
                                {"max_sd_ratio", r.max_sd_ratio}, {"min_ess", r.min_ess},
                                {"draws", ch.draws()}, {"pass", ok}};
  }
  metrics["seconds"] = since(t0);
  det << "time " << fmt(since(t0), 0) << " s";
  return {5, pass, det.str(), metrics};
}

Outcome degenerate_criterion(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const Dataset d = generate_sim1(200, seed, 10).train;
  HyperConfig hc;
  hc.seed = seed;
  const FittedModel g = optimize_hyperparams(d.X, d.y, ModelKind::gp, hc);
  HyperParams hp;
  hp.f = g.params.f;
  hp.f.log_magnitude = 0.0;
  hp.phi.log_magnitude = std::log(1e-10);
  hp.phi.constant_mean = g.params.f.log_magnitude;
  hp.phi.log_lengthscales = {0.0};
  hp.theta.log_magnitude = std::log(1e-10);
  hp.theta.constant_mean = g.params.log_noise_variance;
  hp.theta.log_lengthscales = {0.0};
  const EPState st = run_ep(d.X, d.y, hp, ModelKind::ep_mn);
  Matrix Xs(kDegenerateGrid, 1);
  for (int i = 0; i < kDegenerateGrid; ++i) Xs(i, 0) = -8.0 + 16.0 * i / (kDegenerateGrid - 1);
  const auto a = predictive_y(latent_predictive(st, hp, d.X, Xs));
  const auto b = g.gp->predict(Xs);
  double dm = 0.0, dv = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dm = std::max(dm, std::abs(a[j].mean_y - b[j].mean_y));
    dv = std::max(dv, std::abs(a[j].var_y - b[j].var_y));
  }
  const bool pass = st.converged && dm < kDegenerateTol && dv < kDegenerateTol;
  return {6, pass,
          "max |mean diff| " + fmt(dm, 8) + ", max |var diff| " + fmt(dv, 8) + " on " +
              std::to_string(kDegenerateGrid) + " points, EP " + (st.converged ? "converged" : "NOT converged") +
              " in " + std::to_string(st.iterations) + " iterations; " + fmt(since(t0), 1) + " s",
          {{"max_mean_diff", dm}, {"max_var_diff", dv}, {"iterations", st.iterations}, {"seconds", since(t0)}}};
}

Outcome moment_criterion(std::uint64_t seed) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  double worst_mean = 0.0, worst_var = 0.0;
  int bad = 0;
  for (int c = 0; c < kMomentConfigs; ++c) {
    LatentPoint p;
    p.has_phi = true;
    p.mean_f = -2.0 + 4.0 * u(rng);
    p.var_f = 0.05 + 1.45 * u(rng);
    p.mean_phi = -1.5 + 2.5 * u(rng);
    p.var_phi = 0.05 + 0.95 * u(rng);
    p.cov_fphi = (-0.9 + 1.8 * u(rng)) * std::sqrt(p.var_f * p.var_phi);
    p.mean_theta = -3.0 + 3.5 * u(rng);
    p.var_theta = 0.05 + 0.95 * u(rng);
    const PredictiveResult r = predictive_y_mn(p);
    const Eigen::Matrix2d L = p.v().cov.llt().matrixL();
    const double st = std::sqrt(p.var_theta);
    // shifted sums around the analytic mean keep the central moments accurate
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (long i = 0; i < kMomentSamples; ++i) {
      const double z0 = z(rng), z1 = z(rng);
      const double f = p.mean_f + L(0, 0) * z0;
      const double ph = p.mean_phi + L(1, 0) * z0 + L(1, 1) * z1;
      const double th = p.mean_theta + st * z(rng);
      const double e = std::exp(0.5 * ph) * f + std::exp(0.5 * th) * z(rng) - r.mean_y;
      const double e2 = e * e;
      s1 += e;
      s2 += e2;
      s3 += e2 * e;
      s4 += e2 * e2;
    }
    const double N = static_cast<double>(kMomentSamples);
    const double m1 = s1 / N;
    const double var = s2 / N - m1 * m1;
    const double c4 = s4 / N - 4.0 * m1 * s3 / N + 6.0 * m1 * m1 * s2 / N - 3.0 * m1 * m1 * m1 * m1;
    const double se_mean = std::sqrt(var / N);
    const double se_var = std::sqrt(std::max(c4 - var * var, 0.0) / N);
    const double zm = std::abs(m1) / se_mean;
    const double zv = std::abs(var - r.var_y) / se_var;
    worst_mean = std::max(worst_mean, zm);
    worst_var = std::max(worst_var, zv);
    if (zm > kMomentSe || zv > kMomentSe) ++bad;
  }
  return {7, bad == 0,
          std::to_string(kMomentConfigs - bad) + "/" + std::to_string(kMomentConfigs) +
              " configurations within " + fmt(kMomentSe, 0) + " SE; worst |z| mean " + fmt(worst_mean, 2) +
              ", variance " + fmt(worst_var, 2) + " (exact moments give " +
              fmt(2.0 * kMomentConfigs * std::erfc(kMomentSe / std::sqrt(2.0)), 2) + " expected exceedances); " +
              fmt(since(t0), 0) + " s",
          {{"configs", kMomentConfigs}, {"samples", kMomentSamples}, {"outside", bad},
           {"worst_mean_z", worst_mean}, {"worst_var_z", worst_var}, {"seconds", since(t0)}}};
}

Outcome property_criterion(std::uint64_t seed) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double recon = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    Gaussian2 marg;
    marg.mean << u(rng), u(rng);
    const double a = 0.5 + 0.4 * u(rng), b = 0.7 + 0.3 * u(rng), c = 0.2 * u(rng);
    marg.cov << a, c, c, b;
    Site2 site;
    const double p = 0.3 + 0.2 * u(rng), q = 0.4 + 0.2 * u(rng), r = 0.1 * u(rng);
    site.tau << p, r, r, q;
    site.nu << u(rng), u(rng);
    recon = std::max(recon, (to_natural(compute_cavity<2>(marg, site).moments) + site - to_natural(marg)).max_abs());
    const Gaussian1 m1 = gaussian1(u(rng), 0.6 + 0.3 * u(rng));
    Site1 s1;
    s1.tau(0, 0) = 0.5 + 0.3 * u(rng);
    s1.nu(0) = u(rng);
    recon = std::max(recon, (to_natural(compute_cavity<1>(m1, s1).moments) + s1 - to_natural(m1)).max_abs());
  }

  double norm = 0.0;
  for (double sd : {1e-4, 1e-2, 0.3, 1.0, 7.0, 50.0}) {
    for (double c : {-20.0, -5.0, 0.0, 2.5, 30.0}) {
      const QuadratureGrid g = simpson_grid(c, sd);
      double s = 0.0;
      for (std::size_t k = 0; k < g.nodes.size(); ++k) s += g.weights[k] * std::exp(log_normal_pdf(g.nodes[k], c, sd * sd));
      norm = std::max(norm, std::abs(s - 1.0));
    }
  }

  GridSpec fine;
  fine.nodes = 2 * GridSpec{}.nodes - 1;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  double doubling = 0.0;
  // observations drawn from each cavity's own predictive distribution
  std::normal_distribution<double> zn;
  for (int rep = 0; rep < 200; ++rep) {
    const Gaussian1 cf = gaussian1(u(rng), 0.5 + 0.4 * u(rng));
    const Gaussian1 ct = gaussian1(-1.5 + u(rng), 0.4 + 0.3 * u(rng));
    const double t = ct.mean(0) + std::sqrt(ct.cov(0, 0)) * zn(rng);
    const double y = cf.mean(0) + std::sqrt(cf.cov(0, 0)) * zn(rng) + std::exp(0.5 * t) * zn(rng);
    const auto a = tilted_moments_n(y, cf, ct);
    const auto b = tilted_moments_n(y, cf, ct, fine);
    doubling = std::max({doubling, rel(a.log_zhat, b.log_zhat), rel(a.v.mean(0), b.v.mean(0)),
                         rel(a.v.cov(0, 0), b.v.cov(0, 0)), rel(a.theta.mean(0), b.theta.mean(0)),
                         rel(a.theta.cov(0, 0), b.theta.cov(0, 0))});
    Gaussian2 cv;
    const double cc = 0.2 * u(rng);
    cv.mean << u(rng), -0.5 + 0.5 * u(rng);
    cv.cov << 0.8 + 0.3 * u(rng), cc, cc, 0.5 + 0.2 * u(rng);
    const Eigen::Vector2d v = cv.mean + Eigen::Matrix2d(cv.cov.llt().matrixL()) * Eigen::Vector2d(zn(rng), zn(rng));
    const double ym = std::exp(0.5 * v(1)) * v(0) + std::exp(0.5 * t) * zn(rng);
    const auto c = tilted_moments_mn(ym, cv, ct);
    const auto e = tilted_moments_mn(ym, cv, ct, fine);
    doubling = std::max({doubling, rel(c.log_zhat, e.log_zhat), rel(c.theta.mean(0), e.theta.mean(0)),
                         rel(c.theta.cov(0, 0), e.theta.cov(0, 0))});
    for (int i = 0; i < 2; ++i) {
      doubling = std::max(doubling, rel(c.v.mean(i), e.v.mean(i)));
      for (int j = 0; j < 2; ++j) doubling = std::max(doubling, rel(c.v.cov(i, j), e.v.cov(i, j)));
    }
  }

  double grad = 0.0;
  {
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    std::normal_distribution<double> z;
    Matrix X(60, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = ux(rng);
    Vector y(60);
    for (Eigen::Index i = 0; i < 60; ++i) y(i) = std::sin(X.row(i).sum()) + 0.2 * z(rng);
    KernelParams k;
    k.log_magnitude = 0.3;
    k.log_lengthscales = {-0.2, 0.1};
    const double ln = std::log(0.05);
    const Vector g = ExactGPModel(X, y, k, ln).log_marginal_gradient();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      auto eval = [&](double step) {
        KernelParams kk = k;
        double l = ln;
        if (i == 0) kk.log_magnitude += step;
        else if (i <= 2) kk.log_lengthscales[static_cast<std::size_t>(i - 1)] += step;
        else l += step;
        return ExactGPModel(X, y, kk, l).log_marginal();
      };
      grad = std::max(grad, std::abs((eval(h) - eval(-h)) / (2.0 * h) - g(i)) / std::max(1.0, std::abs(g(i))));
    }
  }

  double perm = 0.0;
  bool perm_converged = true;
  {
    const Dataset d = generate_sim1(60, seed, 10).train;
    std::vector<Eigen::Index> idx(60);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const Dataset p = d.subset(idx);
    EPConfig cfg;
    cfg.tol = 1e-12;
    cfg.site_tol = 1e-10;
    cfg.max_iter = 500;
    HyperParams hp;
    hp.f.log_lengthscales = {0.3};
    hp.theta.log_magnitude = 0.5;
    hp.theta.log_lengthscales = {1.2};
    hp.theta.constant_mean = -3.0;
    hp.phi.log_lengthscales = {1.0};
    hp.phi.constant_mean = -1.5;
    for (ModelKind kind : {ModelKind::ep_n, ModelKind::ep_mn}) {
      HyperParams h = hp;
      if (kind == ModelKind::ep_n) h.f.log_magnitude = std::log(0.3);
      const EPState a = run_ep(d.X, d.y, h, kind, cfg);
      const EPState b = run_ep(p.X, p.y, h, kind, cfg);
      perm_converged = perm_converged && a.converged && b.converged;
      perm = std::max(perm, std::abs(a.log_z_ep - b.log_z_ep));
    }
  }

  const double secs = since(t0);
  const bool pass = recon < kReconTol && norm < kNormTol && doubling < kDoublingTol && grad < kGradTol &&
                    perm_converged && perm < kPermTol && secs < 60.0 * kPropertyMinutes;
  std::ostringstream d;
  d << std::scientific << std::setprecision(1) << "reconstruction " << recon << ", normalization " << norm
    << ", grid doubling " << doubling << ", gradient " << grad << ", permutation " << perm << std::defaultfloat
    << "; " << fmt(secs, 1) << " s";
  return {8, pass, d.str(),
          {{"reconstruction", recon}, {"normalization", norm}, {"grid_doubling", doubling},
           {"gradient", grad}, {"permutation", perm}, {"seconds", secs}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hetgp acceptance run"};
  std::string out_dir = "acceptance_reports";
  std::uint64_t seed = 0;
  std::vector<int> only;
  bool strict = false;
  app.add_option("--out-dir", out_dir)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> want = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8} : std::set<int>(only.begin(), only.end());
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  std::vector<Outcome> results;
  auto report = [&](Outcome o) {
    std::cout << "criterion " << o.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    results.push_back(std::move(o));
  };
  try {
    std::optional<BenchmarkReport> sim1, sim2;
    if (want.count(1) || want.count(4)) sim1 = run_suite(Suite::sim1, seed, dir);
    if (want.count(2) || want.count(4)) sim2 = run_suite(Suite::sim2, seed, dir);
    if (want.count(1)) report(table_criterion(1, *sim1, kSim1Ref, kSim1Tol, true, kSim1Minutes));
    if (want.count(2)) report(table_criterion(2, *sim2, kSim2Ref, kSim2Tol, true, kSim1Minutes));
    if (want.count(3)) {
      const BenchmarkReport moto = run_suite(Suite::motorcycle, seed, dir);
      report(table_criterion(3, moto, kMotoRef, kMotoTol, false, kMotoMinutes));
    }
    if (want.count(4)) report(convergence_criterion({&*sim1, &*sim2}, HyperConfig{}.ep.max_iter));
    if (want.count(5)) report(mcmc_criterion(seed));
    if (want.count(6)) report(degenerate_criterion(seed));
    if (want.count(7)) report(moment_criterion(seed));
    if (want.count(8)) report(property_criterion(seed));
  } catch (const std::exception& e) {
    std::cout << "acceptance run aborted: " << e.what() << std::endl;
    return 2;
  }

  json summary{{"report", "acceptance"}, {"version", kVersion}, {"seed", seed}, {"criteria", json::array()}};
  int failed = 0;
  for (const auto& o : results) {
    failed += o.pass ? 0 : 1;
    summary["criteria"].push_back({{"id", o.id}, {"pass", o.pass}, {"detail", o.detail}, {"metrics", o.metrics}});
  }
  write_json((dir / "acceptance.json").string(), summary);
  std::cout << "acceptance: " << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
  return strict && failed > 0 ? 1 : 0;
}
