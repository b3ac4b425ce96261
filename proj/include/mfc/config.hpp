#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfc/problems.hpp"
#include "mfc/types.hpp"

namespace mfc {

using Json = nlohmann::json;

/// Schema violation carrying the JSON pointer of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config error at " + field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

constexpr int kConfigSchemaVersion = 1;

struct SolverConfig {
  std::string type = "sweep";  // sweep | direct | both
  double theta = 0.5;
  double tol = 1e-8;
  int max_iter = 200;
};

struct DiagnosticsConfig {
  bool convergence_study = true;
  int maximality_trials = 20;
  double binning_delta = 0.05;
  double sinkhorn_eps = 1e-3;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string problem_id;
  ParamMap problem_params;
  std::vector<int> n_sweep;  // single entry when "N" was given
  int time_nodes = 100;      // S
  SolverConfig solver;
  std::uint64_t seed = 0;
  DiagnosticsConfig diagnostics;
  std::string output_dir = "out";
};

namespace detail {

inline const Json& fetch(const Json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(path + "/" + key, "missing required field");
  return j.at(key);
}

template <class T>
inline T as(const Json& j, const std::string& where, const char* kind) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where, std::string("expected ") + kind);
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  ExperimentConfig cfg;

  cfg.schema_version = detail::as<int>(detail::fetch(j, "", "schema_version"),
                                       "/schema_version", "integer");
  if (cfg.schema_version != kConfigSchemaVersion)
    throw ConfigError("/schema_version", "unsupported schema version");

  const Json& prob = detail::fetch(j, "", "problem");
  cfg.problem_id = detail::as<std::string>(detail::fetch(prob, "/problem", "id"),
                                           "/problem/id", "string");
  {
    bool known = false;
    for (const auto& info : problem_catalog()) known |= (info.id == cfg.problem_id);
    if (!known) throw ConfigError("/problem/id", "unknown problem id: " + cfg.problem_id);
  }
  if (prob.contains("params")) {
    const Json& params = prob.at("params");
    if (!params.is_object()) throw ConfigError("/problem/params", "expected object");
    for (auto it = params.begin(); it != params.end(); ++it)
      cfg.problem_params[it.key()] =
          detail::as<double>(it.value(), "/problem/params/" + it.key(), "number");
  }

  const bool has_n = j.contains("N");
  const bool has_sweep = j.contains("N_sweep");
  if (has_n == has_sweep)
    throw ConfigError("/N", "exactly one of N or N_sweep is required");
  if (has_n) {
    const int n = detail::as<int>(j.at("N"), "/N", "integer");
    if (n < 1) throw ConfigError("/N", "N must be >= 1");
    cfg.n_sweep = {n};
  } else {
    cfg.n_sweep = detail::as<std::vector<int>>(j.at("N_sweep"), "/N_sweep", "integer array");
    if (cfg.n_sweep.empty()) throw ConfigError("/N_sweep", "must be nonempty");
    for (std::size_t i = 0; i + 1 < cfg.n_sweep.size(); ++i)
      if (cfg.n_sweep[i] >= cfg.n_sweep[i + 1])
        throw ConfigError("/N_sweep", "must be strictly increasing");
    if (cfg.n_sweep.front() < 1) throw ConfigError("/N_sweep", "entries must be >= 1");
  }

  cfg.time_nodes = detail::as<int>(detail::fetch(j, "", "time_nodes"), "/time_nodes", "integer");
  if (cfg.time_nodes < 1) throw ConfigError("/time_nodes", "must be >= 1");

  if (!j.contains("seed")) throw ConfigError("/seed", "missing required field");
  cfg.seed = detail::as<std::uint64_t>(j.at("seed"), "/seed", "unsigned integer");

  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    if (s.contains("type")) {
      cfg.solver.type = detail::as<std::string>(s.at("type"), "/solver/type", "string");
      if (cfg.solver.type != "sweep" && cfg.solver.type != "direct" && cfg.solver.type != "both")
        throw ConfigError("/solver/type", "must be one of sweep, direct, both");
    }
    if (s.contains("theta")) {
      cfg.solver.theta = detail::as<double>(s.at("theta"), "/solver/theta", "number");
      if (cfg.solver.theta <= 0.0 || cfg.solver.theta > 1.0)
        throw ConfigError("/solver/theta", "must lie in (0, 1]");
    }
    if (s.contains("tol"))
      cfg.solver.tol = detail::as<double>(s.at("tol"), "/solver/tol", "number");
    if (s.contains("max_iter"))
      cfg.solver.max_iter = detail::as<int>(s.at("max_iter"), "/solver/max_iter", "integer");
  }

  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    if (d.contains("convergence_study"))
      cfg.diagnostics.convergence_study =
          detail::as<bool>(d.at("convergence_study"), "/diagnostics/convergence_study", "boolean");
    if (d.contains("maximality_trials"))
      cfg.diagnostics.maximality_trials = detail::as<int>(
          d.at("maximality_trials"), "/diagnostics/maximality_trials", "integer");
    if (d.contains("binning_delta")) {
      cfg.diagnostics.binning_delta =
          detail::as<double>(d.at("binning_delta"), "/diagnostics/binning_delta", "number");
      if (cfg.diagnostics.binning_delta <= 0.0)
        throw ConfigError("/diagnostics/binning_delta", "must be positive");
    }
    if (d.contains("sinkhorn_eps")) {
      cfg.diagnostics.sinkhorn_eps =
          detail::as<double>(d.at("sinkhorn_eps"), "/diagnostics/sinkhorn_eps", "number");
      if (cfg.diagnostics.sinkhorn_eps <= 0.0)
        throw ConfigError("/diagnostics/sinkhorn_eps", "must be positive");
    }
  }

  if (j.contains("output_dir"))
    cfg.output_dir = detail::as<std::string>(j.at("output_dir"), "/output_dir", "string");

  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  Json j;
  try {
    f >> j;
  } catch (const Json::exception& e) {
    throw std::runtime_error("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["schema_version"] = cfg.schema_version;
  j["problem"]["id"] = cfg.problem_id;
  for (const auto& [k, v] : cfg.problem_params) j["problem"]["params"][k] = v;
  if (cfg.n_sweep.size() == 1)
    j["N"] = cfg.n_sweep.front();
  else
    j["N_sweep"] = cfg.n_sweep;
  j["time_nodes"] = cfg.time_nodes;
  j["seed"] = cfg.seed;
  j["solver"] = {{"type", cfg.solver.type},
                 {"theta", cfg.solver.theta},
                 {"tol", cfg.solver.tol},
                 {"max_iter", cfg.solver.max_iter}};
  j["diagnostics"] = {{"convergence_study", cfg.diagnostics.convergence_study},
                      {"maximality_trials", cfg.diagnostics.maximality_trials},
                      {"binning_delta", cfg.diagnostics.binning_delta},
                      {"sinkhorn_eps", cfg.diagnostics.sinkhorn_eps}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace mfc
