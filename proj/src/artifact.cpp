#include "hetgp/artifact.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hetgp/errors.hpp"

namespace hetgp {

using nlohmann::json;

namespace {

// Non-finite values are stored as null.
json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double json_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw SchemaError("expected a number");
  return j.get<double>();
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) rows.push_back(vec_json(M.row(i).transpose()));
  return rows;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("field '") + key + "': " + e.what());
  }
}

Vector json_vec(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix json_mat(const json& j, const char* key, Eigen::Index cols) {
  const auto rows = get<std::vector<std::vector<double>>>(j, key);
  Matrix M(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) {
      throw SchemaError(std::string("field '") + key + "': ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  }
  return M;
}

json kernel_json(const KernelParams& k) {
  return {{"log_magnitude", k.log_magnitude},
          {"log_lengthscales", k.log_lengthscales},
          {"mean", k.constant_mean}};
}

KernelParams json_kernel(const json& j) {
  KernelParams k;
  k.log_magnitude = get<double>(j, "log_magnitude");
  k.log_lengthscales = get<std::vector<double>>(j, "log_lengthscales");
  k.constant_mean = get<double>(j, "mean");
  if (k.log_lengthscales.empty()) throw SchemaError("kernel without length-scales");
  return k;
}

json sites_json(const SiteSet& s) {
  json th = json::array();
  for (const auto& t : s.theta) th.push_back({t.nu(0), t.tau(0, 0)});
  json lz = json::array();
  for (double v : s.log_zhat) lz.push_back(num_json(v));
  json out{{"theta", th}, {"log_zhat", lz}};
  if (s.bivariate()) {
    json v = json::array();
    for (const auto& t : s.v) v.push_back({t.nu(0), t.nu(1), t.tau(0, 0), t.tau(0, 1), t.tau(1, 1)});
    out["v"] = v;
  } else {
    json f = json::array();
    for (const auto& t : s.f) f.push_back({t.nu(0), t.tau(0, 0)});
    out["f"] = f;
  }
  return out;
}

SiteSet json_sites(const json& j, bool bivariate, std::size_t n) {
  const auto th = get<std::vector<std::vector<double>>>(j, "theta");
  const auto lz = get<std::vector<json>>(j, "log_zhat");
  if (th.size() != n || lz.size() != n) throw SchemaError("site count does not match the training data");
  SiteSet s = SiteSet::zeros(n, bivariate);
  for (std::size_t i = 0; i < n; ++i) {
    if (th[i].size() != 2) throw SchemaError("theta site needs 2 values");
    s.theta[i].nu(0) = th[i][0];
    s.theta[i].tau(0, 0) = th[i][1];
  }
  for (std::size_t i = 0; i < n; ++i) s.log_zhat[i] = json_num(lz[i]);
  if (bivariate) {
    const auto v = get<std::vector<std::vector<double>>>(j, "v");
    if (v.size() != n) throw SchemaError("site count does not match the training data");
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i].size() != 5) throw SchemaError("(f~, phi) site needs 5 values");
      s.v[i].nu << v[i][0], v[i][1];
      s.v[i].tau << v[i][2], v[i][3], v[i][3], v[i][4];
    }
  } else {
    const auto f = get<std::vector<std::vector<double>>>(j, "f");
    if (f.size() != n) throw SchemaError("site count does not match the training data");
    for (std::size_t i = 0; i < n; ++i) {
      if (f[i].size() != 2) throw SchemaError("f site needs 2 values");
      s.f[i].nu(0) = f[i][0];
      s.f[i].tau(0, 0) = f[i][1];
    }
  }
  return s;
}

}  // namespace

std::uint64_t column_hash(const Matrix& X, const Vector& y) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](double v) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &v, sizeof(double));
    for (unsigned char c : b) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index r = 0; r < X.rows(); ++r) feed(X(r, c));
  }
  for (Eigen::Index r = 0; r < y.size(); ++r) feed(y(r));
  return h;
}

FittedModel ModelArtifact::restore() const {
  FittedModel m;
  m.kind = kind;
  m.params = params;
  m.X = X;
  m.y = y;
  m.log_evidence = log_evidence;
  m.objective = log_evidence;
  m.converged = converged;
  if (kind == ModelKind::gp) {
    m.gp.emplace(X, y, params.f, params.log_noise_variance);
    return m;
  }
  if (!sites) throw SchemaError("EP artifact without sites");
  EPState st;
  st.kind = kind;
  st.sites = *sites;
  st.posterior = recompute_posterior(build_priors(X, kind, params), st.sites);
  st.log_z_ep = log_evidence;
  st.iterations = ep_iterations;
  st.converged = converged;
  m.ep = std::move(st);
  return m;
}

bool ModelArtifact::fingerprint_matches() const {
  return fingerprint.rows == static_cast<std::size_t>(y.size()) &&
         fingerprint.column_hash == column_hash(X, y);
}

ModelArtifact make_artifact(const FittedModel& m, const Standardization& tr, bool ard,
                            std::vector<std::string> x_columns, std::string y_column) {
  ModelArtifact a;
  a.kind = m.kind;
  a.ard = ard;
  a.params = m.params;
  if (m.ep) {
    a.sites = m.ep->sites;
    a.ep_iterations = m.ep->iterations;
  }
  a.X = m.X;
  a.y = m.y;
  a.standardization = tr;
  a.x_columns = std::move(x_columns);
  a.y_column = std::move(y_column);
  a.fingerprint = {static_cast<std::size_t>(m.y.size()), column_hash(m.X, m.y)};
  a.log_evidence = m.log_evidence;
  a.converged = m.converged;
  return a;
}

std::vector<PredictiveResult> predict_original(const FittedModel& m, const Standardization& tr,
                                               const Matrix& X_raw) {
  auto preds = m.predict(tr.apply_x(X_raw));
  for (auto& p : preds) {
    p.mean_y = tr.invert_y(p.mean_y);
    p.var_y = tr.invert_var(p.var_y);
  }
  return preds;
}

json to_json(const ModelArtifact& a) {
  json hp{{"f", kernel_json(a.params.f)}};
  if (a.kind == ModelKind::gp) hp["log_noise_variance"] = a.params.log_noise_variance;
  if (is_ep(a.kind)) hp["theta"] = kernel_json(a.params.theta);
  if (has_signal_process(a.kind)) hp["phi"] = kernel_json(a.params.phi);
  json j{{"format", "hetgp-model"},
         {"schema_version", kArtifactSchema},
         {"version", a.version},
         {"model_kind", to_string(a.kind)},
         {"ard", a.ard},
         {"hyperparameters", hp},
         {"standardization",
          {{"x_mean", vec_json(a.standardization.x_mean)},
           {"x_sd", vec_json(a.standardization.x_sd)},
           {"y_mean", a.standardization.y_mean},
           {"y_sd", a.standardization.y_sd}}},
         {"x_columns", a.x_columns},
         {"y_column", a.y_column},
         {"fingerprint",
          {{"rows", a.fingerprint.rows}, {"column_hash", a.fingerprint.column_hash}}},
         {"training", {{"X", mat_json(a.X)}, {"y", vec_json(a.y)}}},
         {"log_evidence", num_json(a.log_evidence)},
         {"ep_iterations", a.ep_iterations},
         {"converged", a.converged}};
  if (a.sites) j["sites"] = sites_json(*a.sites);
  return j;
}

ModelArtifact artifact_from_json(const json& j) {
  if (get<std::string>(j, "format") != "hetgp-model") throw SchemaError("not a model artifact");
  if (get<int>(j, "schema_version") != kArtifactSchema) throw SchemaError("unsupported schema version");
  ModelArtifact a;
  a.version = get<std::string>(j, "version");
  try {
    a.kind = parse_model_kind(get<std::string>(j, "model_kind"));
  } catch (const InputError& e) {
    throw SchemaError(e.what());
  }
  a.ard = get<bool>(j, "ard");
  const json& hp = field(j, "hyperparameters");
  a.params.f = json_kernel(field(hp, "f"));
  if (a.kind == ModelKind::gp) a.params.log_noise_variance = get<double>(hp, "log_noise_variance");
  if (is_ep(a.kind)) a.params.theta = json_kernel(field(hp, "theta"));
  if (has_signal_process(a.kind)) a.params.phi = json_kernel(field(hp, "phi"));

  const json& st = field(j, "standardization");
  a.standardization.x_mean = json_vec(st, "x_mean");
  a.standardization.x_sd = json_vec(st, "x_sd");
  a.standardization.y_mean = get<double>(st, "y_mean");
  a.standardization.y_sd = get<double>(st, "y_sd");
  const Eigen::Index dim = a.standardization.x_mean.size();
  if (dim == 0 || a.standardization.x_sd.size() != dim) throw SchemaError("bad standardization");

  a.x_columns = get<std::vector<std::string>>(j, "x_columns");
  a.y_column = get<std::string>(j, "y_column");
  const json& fp = field(j, "fingerprint");
  a.fingerprint.rows = get<std::size_t>(fp, "rows");
  a.fingerprint.column_hash = get<std::uint64_t>(fp, "column_hash");
  const json& tr = field(j, "training");
  a.X = json_mat(tr, "X", dim);
  a.y = json_vec(tr, "y");
  if (a.X.rows() != a.y.size() || a.y.size() == 0) throw SchemaError("bad training data");
  try {
    a.params.f.check_dim(dim);
  } catch (const InputError& e) {
    throw SchemaError(e.what());
  }
  a.log_evidence = json_num(field(j, "log_evidence"));
  a.ep_iterations = get<int>(j, "ep_iterations");
  a.converged = get<bool>(j, "converged");
  if (is_ep(a.kind)) {
    a.sites = json_sites(field(j, "sites"), has_signal_process(a.kind),
                         static_cast<std::size_t>(a.y.size()));
  }
  return a;
}

void save_artifact(const std::string& path, const ModelArtifact& a) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << to_json(a).dump(1) << "\n";
  if (!out) throw InputError("failed writing '" + path + "'");
}

ModelArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  return artifact_from_json(j);
}

}  // namespace hetgp
