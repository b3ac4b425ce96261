#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "mfc/config.hpp"
#include "mfc/csv.hpp"
#include "mfc/meanfield.hpp"
#include "mfc/replicator.hpp"

namespace mfc {

struct RunOptions {
  std::string output_dir_override;
  int threads = 1;
  bool verbose = false;
};

namespace detail {

inline std::string col_name(const std::string& base, int a, int d) {
  return d == 1 ? base : base + std::to_string(a);
}

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_trajectories_csv(const std::string& path, const GeneratedPair& pair) {
  const int d = static_cast<int>(pair.x[0].rows());
  std::vector<std::string> header{"t", "i"};
  for (int a = 0; a < d; ++a) header.push_back(col_name("x", a, d));
  for (int a = 0; a < d; ++a) header.push_back(col_name("r", a, d));
  for (int a = 0; a < d; ++a) header.push_back(col_name("u", a, d));
  CsvWriter csv(header);
  for (int k = 0; k < pair.nodes(); ++k) {
    // Controls are piecewise constant; the terminal row repeats the value of
    // the trailing interval.
    const Mat& u = pair.u[std::min(k, pair.payload_nodes() - 1)];
    for (int i = 0; i < pair.particles(); ++i) {
      std::vector<std::string> row{format_double(pair.grid.node(k)), std::to_string(i)};
      for (int a = 0; a < d; ++a) row.push_back(format_double(pair.x[k](a, i)));
      for (int a = 0; a < d; ++a) row.push_back(format_double(pair.r[k](a, i)));
      for (int a = 0; a < d; ++a) row.push_back(format_double(u(a, i)));
      csv.add_row(row);
    }
  }
  csv.save(path);
}

inline void write_replicator_csv(const std::string& path, const ReplicatorTrajectory& traj) {
  const int d = static_cast<int>(traj.x[0].rows());
  const int n = static_cast<int>(traj.label[0].rows());
  std::vector<std::string> header{"t", "i"};
  for (int a = 0; a < d; ++a) header.push_back(col_name("x", a, d));
  for (int a = 0; a < n; ++a) header.push_back("label" + std::to_string(a));
  CsvWriter csv(header);
  for (std::size_t k = 0; k < traj.x.size(); ++k) {
    for (int i = 0; i < traj.particles(); ++i) {
      std::vector<std::string> row{format_double(traj.grid.node(static_cast<int>(k))),
                                   std::to_string(i)};
      for (int a = 0; a < d; ++a) row.push_back(format_double(traj.x[k](a, i)));
      for (int a = 0; a < n; ++a) row.push_back(format_double(traj.label[k](a, i)));
      csv.add_row(row);
    }
  }
  csv.save(path);
}

inline CsvWriter report_writer() {
  return CsvWriter({"N", "converged", "cost", "support_radius", "lipschitz", "w1_to_finest",
                    "r_independence", "maximality_residual", "phi_gap"});
}

inline CsvWriter sweep_writer() {
  return CsvWriter({"N", "solver", "iteration", "cost", "control_update",
                    "maximality_residual"});
}

}  // namespace detail

/// Executes a validated experiment configuration. Writes trajectories.csv
/// (finest N), report.csv, sweep.csv and manifest.json into the output
/// directory; deterministic given the seed. Returns the process exit code.
inline int run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  const std::string out_dir =
      opt.output_dir_override.empty() ? cfg.output_dir : opt.output_dir_override;
  fs::create_directories(out_dir);
  const auto t_start = std::chrono::steady_clock::now();

  Json manifest;
  manifest["schema_version"] = kConfigSchemaVersion;
  manifest["tool"] = {{"name", "mfc"}, {"version", "0.1.0"}};
  manifest["config"] = config_to_json(cfg);
  manifest["solver_failures"] = Json::array();
  manifest["notes"]["w1_to_finest"] =
      "entropic transport across different atom counts; approximate with one-sided "
      "bias of order eps*log(N)";

  int exit_code = 0;
  const bool replicator = cfg.problem_id.rfind("replicator_", 0) == 0;

  try {
    if (replicator) {
      auto p = make_replicator_problem(cfg.problem_id, cfg.problem_params);
      const int N = cfg.n_sweep.back();
      const TimeGrid grid(cfg.time_nodes, p->horizon());
      const Atoms x0 = p->sample_initial_x(N, cfg.seed);
      const Mat lambda0 = p->sample_initial_labels(N, cfg.seed);
      ControlGrid u = ControlGrid::zero(p->dim(), N, grid.steps);
      ReplicatorTrajectory traj = integrate_replicator(*p, u, x0, lambda0, grid);
      detail::write_replicator_csv(out_dir + "/trajectories.csv", traj);
      detail::report_writer().save(out_dir + "/report.csv");
      detail::sweep_writer().save(out_dir + "/sweep.csv");
      manifest["replicator"] = {{"renormalizations", traj.renormalizations},
                                {"cost", cost_replicator(*p, traj, u)}};
    } else {
      auto p = make_problem(cfg.problem_id, cfg.problem_params);
      const TimeGrid grid(cfg.time_nodes, p->horizon());

      StudyOptions study_opt;
      study_opt.sweep.theta = cfg.solver.theta;
      study_opt.sweep.tol = cfg.solver.tol;
      study_opt.sweep.max_iter = cfg.solver.max_iter;
      study_opt.seed = cfg.seed;
      study_opt.binning_delta = cfg.diagnostics.binning_delta;
      study_opt.sinkhorn_eps = cfg.diagnostics.sinkhorn_eps;
      study_opt.maximality_trials = cfg.diagnostics.maximality_trials;
      study_opt.threads = opt.threads;

      StudyResult study = convergence_study(*p, cfg.n_sweep, grid, study_opt);

      CsvWriter report = detail::report_writer();
      if (cfg.diagnostics.convergence_study) {
        for (const auto& row : study.report.rows) {
          report.add_row({std::to_string(row.N), row.solver_converged ? "1" : "0",
                          format_double(row.cost), format_double(row.support_radius),
                          format_double(row.lipschitz), format_double(row.w1_to_finest),
                          format_double(row.r_independence),
                          format_double(row.maximality_residual),
                          format_double(row.phi_gap)});
        }
      }
      report.save(out_dir + "/report.csv");

      CsvWriter sweep_csv = detail::sweep_writer();
      for (std::size_t idx = 0; idx < study.sweep_reports.size(); ++idx) {
        const SweepReport& rep = study.sweep_reports[idx];
        if (!rep.converged) {
          Json failure;
          failure["N"] = cfg.n_sweep[idx];
          failure["solver"] = "sweep";
          failure["reason"] = rep.abort_reason.empty() ? "not converged within max_iter"
                                                       : rep.abort_reason;
          manifest["solver_failures"].push_back(failure);
          exit_code = 3;
        }
        for (int it = 0; it < rep.iterations; ++it)
          sweep_csv.add_row({std::to_string(cfg.n_sweep[idx]), "sweep", std::to_string(it),
                             format_double(rep.costs[it]),
                             format_double(rep.control_updates[it]),
                             format_double(rep.maximality_residuals[it])});
      }

      if (cfg.solver.type == "direct" || cfg.solver.type == "both") {
        const int N = cfg.n_sweep.back();
        const Atoms x0 = p->sample_initial(N, cfg.seed);
        DirectOptions dopt;
        dopt.tol = cfg.solver.tol;
        dopt.max_iter = cfg.solver.max_iter;
        DirectResult direct =
            direct_optimize(*p, x0, grid, ControlGrid::zero(p->dim(), N, grid.steps), dopt);
        for (std::size_t it = 0; it < direct.cost_history.size(); ++it)
          sweep_csv.add_row({std::to_string(N), "direct", std::to_string(static_cast<int>(it)),
                             format_double(direct.cost_history[it]), "", ""});
        manifest["direct"] = {{"converged", direct.converged},
                              {"stop_reason", direct.stop_reason},
                              {"final_cost", direct.cost_history.back()}};
        if (!direct.converged && cfg.solver.type == "direct") exit_code = 3;
      }
      sweep_csv.save(out_dir + "/sweep.csv");

      detail::write_trajectories_csv(out_dir + "/trajectories.csv", study.pairs.back());
    }
  } catch (const std::exception& e) {
    manifest["solver_failures"].push_back({{"reason", e.what()}});
    manifest["wall_time_s"] = detail::elapsed_s(t_start);
    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
    if (opt.verbose) std::cerr << "run failed: " << e.what() << "\n";
    return 3;
  }

  manifest["wall_time_s"] = detail::elapsed_s(t_start);
  std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
  return exit_code;
}

}  // namespace mfc
