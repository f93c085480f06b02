#pragma once

#include <string>

#include <json.hpp>

#include "hetgp/benchmark.hpp"
#include "hetgp/model_select.hpp"

namespace hetgp {

inline constexpr int kReportSchema = 1;

// Non-finite values and failed entries are written as the string "failed".
nlohmann::json to_json(const EvalReport& r, std::uint64_t seed, int folds, double log_jacobian);
nlohmann::json to_json(const BenchmarkReport& r);

void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace hetgp
