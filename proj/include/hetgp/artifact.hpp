#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetgp/datasets.hpp"
#include "hetgp/model_select.hpp"

namespace hetgp {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kArtifactSchema = 1;

// FNV-1a over the bytes of every column of X, then y.
std::uint64_t column_hash(const Matrix& X, const Vector& y);

struct Fingerprint {
  std::size_t rows = 0;
  std::uint64_t column_hash = 0;
};

// A fitted model with everything needed to predict: hyperparameters, EP sites,
// the training data on the model scale and the map from the original scale.
struct ModelArtifact {
  std::string version = kVersion;
  ModelKind kind = ModelKind::gp;
  bool ard = false;
  HyperParams params;
  std::optional<SiteSet> sites;
  Matrix X;  // model scale
  Vector y;
  Standardization standardization;
  std::vector<std::string> x_columns;
  std::string y_column;
  Fingerprint fingerprint;
  double log_evidence = 0.0;
  int ep_iterations = 0;
  bool converged = true;

  // Rebuilds the inference state; EP posteriors are recomputed from the stored sites.
  FittedModel restore() const;
  // True when the stored training data still matches the fingerprint.
  bool fingerprint_matches() const;
};

ModelArtifact make_artifact(const FittedModel& m, const Standardization& tr, bool ard,
                            std::vector<std::string> x_columns, std::string y_column);

// Predictive moments on the original scale for original-scale inputs.
std::vector<PredictiveResult> predict_original(const FittedModel& m, const Standardization& tr,
                                               const Matrix& X_raw);

nlohmann::json to_json(const ModelArtifact& a);
// Throws SchemaError on missing or ill-typed fields.
ModelArtifact artifact_from_json(const nlohmann::json& j);
void save_artifact(const std::string& path, const ModelArtifact& a);
ModelArtifact load_artifact(const std::string& path);

}  // namespace hetgp
