#pragma once

#include <string>
#include <vector>

#include "mfc/measures.hpp"
#include "mfc/problems.hpp"
#include "mfc/types.hpp"

namespace mfc {

/// Uniform partition of [0, T] into S steps (S+1 nodes).
struct TimeGrid {
  int steps = 1;        // S
  double horizon = 1.0; // T

  TimeGrid(int S, double T) : steps(S), horizon(T) {
    require(S >= 1, "TimeGrid: needs at least one step");
    require(T > 0.0, "TimeGrid: horizon must be positive");
  }
  double dt() const { return horizon / steps; }
  double node(int k) const { return horizon * k / steps; }
  int nodes() const { return steps + 1; }
};

/// Piecewise-constant-in-time controls: values[k] is d x N, held on
/// [t_k, t_{k+1}).
struct ControlGrid {
  std::vector<Mat> values;  // S entries

  static ControlGrid zero(int dim, int N, int steps) {
    ControlGrid u;
    u.values.assign(steps, Mat::Zero(dim, N));
    return u;
  }
  static ControlGrid constant(const Mat& value, int steps) {
    ControlGrid u;
    u.values.assign(steps, value);
    return u;
  }

  int steps() const { return static_cast<int>(values.size()); }
  int particles() const { return values.empty() ? 0 : static_cast<int>(values[0].cols()); }
  int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].rows()); }

  bool in_set(const ControlSet& K, double tol = 1e-12) const {
    for (const Mat& uk : values)
      for (int i = 0; i < uk.cols(); ++i)
        if (!K.contains(uk.col(i), tol)) return false;
    return true;
  }

  double max_abs_diff(const ControlGrid& other) const {
    double m = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
      m = std::max(m, (values[k] - other.values[k]).cwiseAbs().maxCoeff());
    return m;
  }
};

/// Node-sampled particle states x_i(t_k), k = 0..S.
struct TrajectoryBundle {
  TimeGrid grid;
  std::vector<Atoms> x;  // S+1 entries, each d x N

  int particles() const { return static_cast<int>(x[0].cols()); }
  EmpiricalMeasure measure_at(int k) const { return EmpiricalMeasure(x[k]); }
  const Atoms& terminal() const { return x.back(); }
};

namespace detail {

/// Full-system drift: column i is v(x_i, psi) + h(x_i, psi) u_i, with the
/// empirical measure re-read from the current particle state.
inline Mat system_rhs(const Problem& p, const Atoms& X, const Mat& U) {
  const int N = static_cast<int>(X.cols());
  Mat out(p.dim(), N);
  const bool vz = p.v_is_zero();
  for (int i = 0; i < N; ++i) {
    const double hi = p.h(X.col(i), X);
    if (vz)
      out.col(i) = hi * U.col(i);
    else
      out.col(i) = p.v(X.col(i), X) + hi * U.col(i);
  }
  return out;
}

}  // namespace detail

/// Classical RK4 integration of the controlled particle system with the
/// empirical measure re-evaluated at every stage. Controls are held constant
/// on each step. Aborts on non-finite states.
inline TrajectoryBundle integrate_forward(const Problem& p, const ControlGrid& u,
                                          const Atoms& x0, const TimeGrid& grid) {
  require(u.steps() == grid.steps, "integrate_forward: control/grid step mismatch");
  require(x0.rows() == p.dim(), "integrate_forward: initial atoms have wrong dimension");
  require(u.dim() == p.dim() && u.particles() == x0.cols(),
          "integrate_forward: control shape mismatch");

  TrajectoryBundle traj{grid, {}};
  traj.x.reserve(grid.nodes());
  traj.x.push_back(x0);
  const double dt = grid.dt();
  Atoms X = x0;
  for (int k = 0; k < grid.steps; ++k) {
    const Mat& U = u.values[k];
    Mat k1 = detail::system_rhs(p, X, U);
    Mat k2 = detail::system_rhs(p, X + 0.5 * dt * k1, U);
    Mat k3 = detail::system_rhs(p, X + 0.5 * dt * k2, U);
    Mat k4 = detail::system_rhs(p, X + dt * k3, U);
    X += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!X.allFinite())
      throw std::runtime_error("integrate_forward: non-finite state at step " +
                               std::to_string(k + 1));
    traj.x.push_back(X);
  }
  return traj;
}

/// Discrete cost: left-endpoint quadrature of the running terms plus the
/// terminal cost. First-order accurate in dt, matching the piecewise-constant
/// control convention.
inline double cost_discrete(const Problem& p, const TrajectoryBundle& traj,
                            const ControlGrid& u) {
  require(u.steps() == traj.grid.steps, "cost_discrete: control/grid step mismatch");
  const double dt = traj.grid.dt();
  const int N = traj.particles();
  double acc = 0.0;
  for (int k = 0; k < traj.grid.steps; ++k) {
    double phi_sum = 0.0;
    for (int i = 0; i < N; ++i) phi_sum += p.phi(u.values[k].col(i));
    const double running = p.L_is_zero() ? 0.0 : p.L(traj.x[k]);
    acc += dt * (running + phi_sum / N);
  }
  if (p.has_terminal_cost()) acc += p.terminal(traj.x.back());
  return acc;
}

}  // namespace mfc
