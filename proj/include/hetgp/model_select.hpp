#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hetgp/datasets.hpp"
#include "hetgp/ep.hpp"
#include "hetgp/gp_exact.hpp"
#include "hetgp/model.hpp"
#include "hetgp/predict.hpp"

namespace hetgp {

// Independent Gaussian prior on every free log-space hyperparameter
// (log-normal on the positive ones). Off by default.
struct HyperPrior {
  bool enabled = false;
  double mean = 0.0;
  double sd = 3.0;
};

// Free parameters per tier:
//   gp     log sf2, log l (1 or d), log s2
//   ep-n   f: log sf2, log l (1 or d); theta: log magnitude, log l, mean
//   ep-mn  f~: log l (1 or d); phi: log magnitude, log l, mean; theta: same
// The theta and phi processes are always isotropic; `ard` applies to f / f~.
struct HyperConfig {
  bool ard = false;
  int starts = 3;
  int max_evals = 400;
  double simplex_tol = 1e-4;
  double bound = 20.0;
  double start_perturbation = 0.5;
  HyperPrior prior;
  EPConfig ep;  // final fit at the selected hyperparameters
  // EP settings while searching; the optimum is refitted with `ep`
  EPConfig search_ep = [] {
    EPConfig c;
    c.tol = 1e-4;
    c.site_tol = 1e-2;
    return c;
  }();
  std::uint64_t seed = 0;
  // EP tiers: first start from the ML-II values of the homoscedastic GP
  bool init_from_gp = true;
  // EP tiers: start each EP run from the sites of the last converged run
  bool warm_start_sites = true;
};

std::size_t free_parameter_count(ModelKind kind, Eigen::Index dim, bool ard);
Vector pack_params(ModelKind kind, const HyperParams& hp, bool ard);
HyperParams unpack_params(ModelKind kind, const Vector& v, Eigen::Index dim, bool ard,
                          double bound = 20.0);
std::vector<std::string> parameter_names(ModelKind kind, Eigen::Index dim, bool ard);

// Heuristic starting point from the data: log sf2 = log var(y),
// l = input range / 2 per dimension, s2 = 0.1 var(y).
HyperParams heuristic_params(const Matrix& X, const Vector& y, ModelKind kind, bool ard);

struct FittedModel {
  ModelKind kind = ModelKind::gp;
  HyperParams params;
  Matrix X;
  Vector y;
  std::optional<ExactGPModel> gp;
  std::optional<EPState> ep;
  double log_evidence = 0.0;  // exact or EP log marginal likelihood
  double objective = 0.0;     // log evidence plus hyperprior, if enabled
  int evaluations = 0;
  int failed_evaluations = 0;
  long search_ep_iterations = 0;  // EP sweeps summed over all evaluations
  bool converged = true;

  std::vector<PredictiveResult> predict(const Matrix& Xs) const;
  LatentPredictive latent(const Matrix& Xs) const;
};

// Inference at fixed hyperparameters.
FittedModel fit_fixed(const Matrix& X, const Vector& y, ModelKind kind, const HyperParams& hp,
                      const EPConfig& ep = {}, const SiteSet* warm_start = nullptr);

double log_hyperprior(const Vector& packed, const HyperPrior& prior);

// Multi-start Nelder-Mead on the log marginal likelihood (plus hyperprior).
// Throws OptimizationError if no evaluation produced a converged model.
FittedModel optimize_hyperparams(const Matrix& X, const Vector& y, ModelKind kind,
                                 const HyperConfig& cfg = {});

// Expected log predictive density under a Gaussian truth N(true_mean, true_sd^2),
// averaged over points.
double test_mlpd(const std::vector<PredictiveResult>& preds, const Vector& true_mean,
                 const Vector& true_sd);

std::vector<std::vector<Eigen::Index>> kfold_partition(Eigen::Index n, int k, std::uint64_t seed);

struct EvalReport {
  ModelKind kind = ModelKind::gp;
  double mlpd = 0.0;
  std::vector<double> fold_mlpd;
  std::vector<bool> fold_failed;
  std::vector<double> point_log_density;  // indexed like the input data; NaN for failed folds
  std::vector<int> ep_iterations;
  double seconds = 0.0;
  bool partial = false;
};

// Fits on the training split and returns one log predictive density per test
// row; may set the EP iteration count of the fold.
using FoldScorer = std::function<std::vector<double>(const Dataset& train, const Dataset& test,
                                                     int& ep_iterations)>;

// Folds run concurrently; a fold whose scorer throws a runtime_error is marked failed.
EvalReport kfold_evaluate(const Dataset& data, int k, ModelKind kind, std::uint64_t seed,
                          const FoldScorer& score);

// Hyperparameters are re-optimized on every training split.
EvalReport kfold_mlpd(const Dataset& data, int k, ModelKind kind, const HyperConfig& cfg,
                      std::uint64_t seed);

// Worker count for folds and repetitions: HETGP_THREADS, else hardware concurrency.
unsigned worker_count();

}  // namespace hetgp
