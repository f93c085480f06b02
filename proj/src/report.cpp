#include "hetgp/report.hpp"

#include <cmath>
#include <fstream>

#include "hetgp/artifact.hpp"
#include "hetgp/errors.hpp"

namespace hetgp {

using nlohmann::json;

namespace {

json value(double v) { return std::isfinite(v) ? json(v) : json("failed"); }

json values(const std::vector<double>& v, const std::vector<bool>& failed) {
  json out = json::array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(i < failed.size() && failed[i] ? json("failed") : value(v[i]));
  }
  return out;
}

json header(const char* kind) {
  return {{"report", kind}, {"schema_version", kReportSchema}, {"version", kVersion}};
}

}  // namespace

json to_json(const EvalReport& r, std::uint64_t seed, int folds, double log_jacobian) {
  json j = header("eval");
  j["model"] = to_string(r.kind);
  j["seed"] = seed;
  j["folds"] = folds;
  j["mlpd"] = value(r.mlpd);
  j["mlpd_original_scale"] = value(r.mlpd + log_jacobian);
  j["fold_mlpd"] = values(r.fold_mlpd, r.fold_failed);
  j["ep_iterations"] = r.ep_iterations;
  j["seconds"] = r.seconds;
  j["partial"] = r.partial;
  return j;
}

json to_json(const BenchmarkReport& r) {
  json j = header("benchmark");
  j["suite"] = to_string(r.suite);
  j["seed"] = r.seed;
  if (r.suite == Suite::motorcycle) {
    j["folds"] = r.folds;
    j["standardized"] = r.standardized;
  } else {
    j["repetitions"] = r.repetitions;
    j["repetition_seeds"] = r.rep_seeds;
  }
  json methods = json::object();
  for (const auto& m : r.results) {
    json e{{"mean_mlpd", value(m.mean)}, {"sd_mlpd", value(m.sd)}, {"failures", m.failures},
           {"mlpd", values(m.mlpd, m.failed)}, {"ep_iterations", m.ep_iterations},
           {"seconds", m.seconds}};
    if (r.suite == Suite::motorcycle) {
      e["pooled_mlpd"] = value(m.pooled);
      e["pooled_mlpd_original_scale"] = value(m.pooled_original);
    } else {
      e["mean_mlpd_noiseless_targets"] = value(m.mean_noiseless);
      e["mlpd_noiseless_targets"] = values(m.mlpd_noiseless, m.failed);
    }
    if (!m.coupled_iterations.empty()) {
      e["cold_iterations_coupled"] = m.coupled_iterations;
      e["cold_iterations_factorized"] = m.factorized_iterations;
    }
    methods[to_string(m.method)] = e;
  }
  j["methods"] = methods;
  j["seconds"] = r.seconds;
  j["partial"] = r.partial;
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace hetgp
