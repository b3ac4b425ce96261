#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mfc/simulate.hpp"

namespace mfc {

namespace detail {

inline void check_budget(double combos) {
  require(combos <= 1e7, "oracle: mesh budget exceeded (limit 1e7 forward evaluations)");
}

/// All mesh points of K: per-axis grid restricted to the set (always keeps
/// the origin).
inline std::vector<Vec> control_mesh(const ControlSet& K, int m) {
  const auto axis = K.axis_mesh(m);
  std::vector<Vec> pts;
  std::vector<int> idx(K.dim, 0);
  while (true) {
    Vec u(K.dim);
    for (int a = 0; a < K.dim; ++a) u(a) = axis[idx[a]];
    if (K.contains(u, 1e-12)) pts.push_back(u);
    int a = 0;
    for (; a < K.dim; ++a) {
      if (++idx[a] < m) break;
      idx[a] = 0;
    }
    if (a == K.dim) break;
  }
  bool has_zero = false;
  for (const Vec& u : pts)
    if (u.norm() == 0.0) has_zero = true;
  if (!has_zero) pts.push_back(Vec::Zero(K.dim));
  return pts;
}

}  // namespace detail

struct OracleResult {
  Mat best_controls;  // constant-in-time oracle: d x N
  double best_cost = 0.0;
};

/// Exhaustive search over constant-in-time mesh controls: the global mesh
/// optimum, solver-independent (only forward integration and the discrete
/// cost are used). Budget m^(N*d) <= 1e7.
inline OracleResult brute_force_constant_controls(const Problem& p, const Atoms& x0,
                                                  const TimeGrid& grid, int m) {
  const int N = static_cast<int>(x0.cols());
  const auto mesh = detail::control_mesh(p.control_set(), m);
  detail::check_budget(std::pow(static_cast<double>(mesh.size()), N));

  std::vector<int> pick(N, 0);
  OracleResult best;
  best.best_cost = std::numeric_limits<double>::infinity();
  while (true) {
    Mat U(p.dim(), N);
    for (int i = 0; i < N; ++i) U.col(i) = mesh[pick[i]];
    ControlGrid u = ControlGrid::constant(U, grid.steps);
    TrajectoryBundle traj = integrate_forward(p, u, x0, grid);
    const double cost = cost_discrete(p, traj, u);
    if (cost < best.best_cost) {
      best.best_cost = cost;
      best.best_controls = U;
    }
    int i = 0;
    for (; i < N; ++i) {
      if (++pick[i] < static_cast<int>(mesh.size())) break;
      pick[i] = 0;
    }
    if (i == N) break;
  }
  return best;
}

struct TimeVaryingOracleResult {
  ControlGrid best_controls;
  double best_cost = 0.0;
};

/// Exhaustive search over nodewise mesh controls on a coarse grid (S <= 3).
/// Verifies that restricting to constant-in-time controls is not an artifact.
inline TimeVaryingOracleResult brute_force_time_varying(const Problem& p, const Atoms& x0,
                                                        const TimeGrid& grid, int m) {
  require(grid.steps <= 3, "brute_force_time_varying: coarse grid only (S <= 3)");
  const int N = static_cast<int>(x0.cols());
  const int slots = N * grid.steps;
  const auto mesh = detail::control_mesh(p.control_set(), m);
  detail::check_budget(std::pow(static_cast<double>(mesh.size()), slots));

  std::vector<int> pick(slots, 0);
  TimeVaryingOracleResult best;
  best.best_cost = std::numeric_limits<double>::infinity();
  while (true) {
    ControlGrid u = ControlGrid::zero(p.dim(), N, grid.steps);
    for (int k = 0; k < grid.steps; ++k)
      for (int i = 0; i < N; ++i) u.values[k].col(i) = mesh[pick[k * N + i]];
    TrajectoryBundle traj = integrate_forward(p, u, x0, grid);
    const double cost = cost_discrete(p, traj, u);
    if (cost < best.best_cost) {
      best.best_cost = cost;
      best.best_controls = u;
    }
    int s = 0;
    for (; s < slots; ++s) {
      if (++pick[s] < static_cast<int>(mesh.size())) break;
      pick[s] = 0;
    }
    if (s == slots) break;
  }
  return best;
}

}  // namespace mfc
