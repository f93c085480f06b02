#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetgp/datasets.hpp"
#include "hetgp/mcmc.hpp"
#include "hetgp/model_select.hpp"

namespace hetgp {

// Benchmark methods: the three inference tiers and the EP-MC hybrids
// (hyperparameters from the EP tier, latent posterior from a sampler).
enum class Method { gp, ep_n, ep_mn, epmc_n, epmc_mn };

std::string to_string(Method m);
// Accepts gp, ep-n, ep-mn, epmc-n, epmc-mn. Throws InputError otherwise.
Method parse_method(std::string_view name);
// Comma-separated list; throws InputError on an empty list or unknown name.
std::vector<Method> parse_methods(std::string_view list);
ModelKind hyper_kind(Method m);
inline bool is_mc(Method m) { return m == Method::epmc_n || m == Method::epmc_mn; }

enum class Suite { sim1, sim2, motorcycle };
std::string to_string(Suite s);
Suite parse_suite(std::string_view name);

struct BenchmarkConfig {
  Suite suite = Suite::sim1;
  std::vector<Method> methods{Method::gp, Method::ep_n, Method::ep_mn};
  int repetitions = 20;  // simulated suites
  std::uint64_t seed = 0;
  int folds = 10;         // motorcycle
  bool standardize = true;  // motorcycle only; simulated suites are used as generated
  std::size_t n_train = 0;  // 0: suite default
  std::size_t n_test = 1000;
  HyperConfig hyper = [] {
    HyperConfig h;
    h.starts = 1;
    return h;
  }();
  ChainConfig chain;
  // for ep-mn fits: cold-start iteration counts of the coupled and factorized schemes
  bool count_iterations = true;
};

struct MethodResult {
  Method method = Method::gp;
  // one value per repetition (simulated) or per fold (motorcycle); NaN when failed.
  // Simulated suites score noisy test targets, in expectation under the true noise.
  std::vector<double> mlpd;
  // simulated suites: MLPD against the noiseless true mean
  std::vector<double> mlpd_noiseless;
  std::vector<bool> failed;
  std::vector<int> ep_iterations;         // final EP fit
  std::vector<int> coupled_iterations;    // cold start, ep-mn only
  std::vector<int> factorized_iterations; // cold start, ep-mn only; -1 when not converged
  std::vector<double> seconds;
  double mean = 0.0;  // over non-failed entries
  double sd = 0.0;
  double mean_noiseless = 0.0;
  // motorcycle: pooled MLPD over all test points (standardized and original scale)
  double pooled = 0.0;
  double pooled_original = 0.0;
  int failures = 0;
};

struct BenchmarkReport {
  Suite suite = Suite::sim1;
  std::uint64_t seed = 0;
  int repetitions = 0;
  int folds = 0;
  bool standardized = false;
  std::vector<std::uint64_t> rep_seeds;
  std::vector<MethodResult> results;
  double seconds = 0.0;
  bool partial = false;

  const MethodResult& result(Method m) const;
  // Number of entries where MLPD(a) > MLPD(b), both present.
  int wins(Method a, Method b) const;
};

// Simulated suites: repetition r uses seed + r for data, hyperparameter search and sampler.
// Motorcycle: one k-fold partition from `seed`, hyperparameters re-optimized per fold.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

// EP-MC k-fold CV: EP hyperparameters per fold, then an elliptical slice chain.
EvalReport kfold_mlpd_mc(const Dataset& data, int k, ModelKind kind, const HyperConfig& cfg,
                         const ChainConfig& chain, std::uint64_t seed);

}  // namespace hetgp
