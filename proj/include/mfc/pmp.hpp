#pragma once

#include <string>
#include <vector>

#include "mfc/simulate.hpp"

namespace mfc {

/// Rescaled costates r_i(t_k); the Hamiltonian carries 1/N weights so that
/// r stays O(1) as N grows.
struct CostateBundle {
  std::vector<Atoms> r;  // S+1 entries, each d x N

  const Atoms& terminal() const { return r.back(); }
};

struct SweepReport {
  int iterations = 0;
  bool converged = false;
  std::string abort_reason;
  std::vector<double> maximality_residuals;  // per iteration
  std::vector<double> control_updates;       // per iteration
  std::vector<double> costs;                 // per iteration
};

/// N-particle Hamiltonian:
///   (1/N) sum_i <r_i, v(x_i,psi) + h(x_i,psi) u_i> - L(psi) - (1/N) sum_i phi(u_i).
inline double hamiltonian_n(const Problem& p, const Atoms& X, const Atoms& R, const Mat& U) {
  const int N = static_cast<int>(X.cols());
  require(R.cols() == N && U.cols() == N, "hamiltonian_n: shape mismatch");
  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    Vec f = p.v_is_zero() ? Vec::Zero(p.dim()) : p.v(X.col(i), X);
    f += p.h(X.col(i), X) * U.col(i);
    acc += R.col(i).dot(f) - p.phi(U.col(i));
  }
  acc /= N;
  if (!p.L_is_zero()) acc -= p.L(X);
  return acc;
}

/// Pointwise Hamiltonian maximization. The Hamiltonian is separable in the
/// controls, so per particle the maximizer of <h r_i, u> - phi(u) over K is
/// the projection of h r_i / lambda onto K (unique).
inline Mat maximize_hamiltonian_pointwise(const Problem& p, const Atoms& X, const Atoms& R) {
  const int N = static_cast<int>(X.cols());
  Mat U(p.dim(), N);
  for (int i = 0; i < N; ++i)
    U.col(i) = p.phi_conjugate_argmax(p.h(X.col(i), X) * R.col(i));
  return U;
}

namespace detail {

/// Costate velocity of the coupled state-costate system, one column per
/// particle. Interaction terms are the defining atom sums of the phase
/// measures: integrals against nu become (1/N) sums over (x_k, r_k), and
/// integrals against rho pick up the control payload u_k.
inline Mat costate_rhs(const Problem& p, const Atoms& X, const Atoms& R, const Mat& U) {
  const int d = p.dim();
  const int N = static_cast<int>(X.cols());
  Mat out = Mat::Zero(d, N);

  const bool skip_vx = p.v_is_zero();
  const bool skip_vpsi = p.v_psi_grad_zero();
  const bool skip_h = p.h_is_constant();
  const bool skip_hpsi = p.h_psi_grad_zero();
  const bool skip_L = p.L_is_zero();

  for (int j = 0; j < N; ++j) {
    Vec acc = Vec::Zero(d);
    if (!skip_vx) acc -= p.v_grad_x(X.col(j), X).transpose() * R.col(j);
    if (!skip_h) acc -= p.h_grad_x(X.col(j), X) * R.col(j).dot(U.col(j));
    if (!skip_L) acc += p.L_grad_psi(X, X.col(j));
    if (!skip_vpsi || !skip_hpsi) {
      Vec inter = Vec::Zero(d);
      for (int k = 0; k < N; ++k) {
        if (!skip_vpsi) inter += p.v_grad_psi(X.col(k), X, X.col(j)).transpose() * R.col(k);
        if (!skip_hpsi) inter += p.h_grad_psi(X.col(k), X, X.col(j)) * R.col(k).dot(U.col(k));
      }
      acc -= inter / N;
    }
    out.col(j) = acc;
  }
  return out;
}

}  // namespace detail

/// Terminal costate: zero without a terminal cost, otherwise minus the
/// terminal cost's measure differential at each terminal atom (for the
/// variance model this is x_i(T) - mean(x(T))).
inline Atoms terminal_costate(const Problem& p, const Atoms& x_terminal) {
  const int N = static_cast<int>(x_terminal.cols());
  Atoms R = Atoms::Zero(p.dim(), N);
  if (p.has_terminal_cost())
    for (int i = 0; i < N; ++i)
      R.col(i) = -p.terminal_grad_psi(x_terminal, x_terminal.col(i));
  return R;
}

/// Backward RK4 on the coupled state-costate system from the terminal
/// condition. The state block is re-integrated backward alongside the
/// costate so every stage sees a consistent particle configuration.
inline CostateBundle integrate_costate_backward(const Problem& p, const TrajectoryBundle& traj,
                                                const ControlGrid& u, const TimeGrid& grid) {
  require(traj.grid.steps == grid.steps, "integrate_costate_backward: grid mismatch");
  require(u.steps() == grid.steps, "integrate_costate_backward: control mismatch");
  const double dt = grid.dt();
  const int S = grid.steps;

  CostateBundle costate;
  costate.r.assign(S + 1, Atoms());
  Atoms X = traj.x[S];
  Atoms R = terminal_costate(p, X);
  costate.r[S] = R;

  auto rhs = [&p](const Atoms& Xs, const Atoms& Rs, const Mat& U, Mat& dX, Mat& dR) {
    dX = detail::system_rhs(p, Xs, U);
    dR = detail::costate_rhs(p, Xs, Rs, U);
  };

  for (int k = S - 1; k >= 0; --k) {
    const Mat& U = u.values[k];
    const double hstep = -dt;  // backward in time
    Mat kx1, kr1, kx2, kr2, kx3, kr3, kx4, kr4;
    rhs(X, R, U, kx1, kr1);
    rhs(X + 0.5 * hstep * kx1, R + 0.5 * hstep * kr1, U, kx2, kr2);
    rhs(X + 0.5 * hstep * kx2, R + 0.5 * hstep * kr2, U, kx3, kr3);
    rhs(X + hstep * kx3, R + hstep * kr3, U, kx4, kr4);
    X += (hstep / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
    R += (hstep / 6.0) * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4);
    if (!R.allFinite() || !X.allFinite())
      throw std::runtime_error("integrate_costate_backward: non-finite costate at step " +
                               std::to_string(k));
    costate.r[k] = R;
  }
  return costate;
}

struct SweepOptions {
  double theta = 0.5;   // relaxation in (0, 1]
  double tol = 1e-8;    // max-node control change
  int max_iter = 200;
};

struct SweepResult {
  ControlGrid u;
  TrajectoryBundle traj;
  CostateBundle costate;
  SweepReport report;
};

/// Forward-backward sweep: integrate forward, integrate the costate backward,
/// maximize the Hamiltonian pointwise, then relax u <- (1-theta) u + theta u^.
/// The relaxed update stays in K by convexity. Aborts when the cost blows up
/// tenfold against the initial iterate.
inline SweepResult forward_backward_sweep(const Problem& p, const Atoms& x0,
                                          const TimeGrid& grid,
                                          const SweepOptions& opt = {}) {
  require(opt.theta > 0.0 && opt.theta <= 1.0, "forward_backward_sweep: theta in (0,1]");
  const int N = static_cast<int>(x0.cols());
  ControlGrid u = ControlGrid::zero(p.dim(), N, grid.steps);

  SweepResult out{u, integrate_forward(p, u, x0, grid), CostateBundle{}, SweepReport{}};
  const double initial_cost = cost_discrete(p, out.traj, u);

  for (int it = 0; it < opt.max_iter; ++it) {
    out.traj = integrate_forward(p, u, x0, grid);
    out.costate = integrate_costate_backward(p, out.traj, u, grid);

    double residual = 0.0;
    ControlGrid u_next = u;
    for (int k = 0; k < grid.steps; ++k) {
      Mat best = maximize_hamiltonian_pointwise(p, out.traj.x[k], out.costate.r[k]);
      // Per-particle Hamiltonian gap at this node, with the 1/N weight of H_N.
      for (int i = 0; i < N; ++i) {
        const double hi = p.h(out.traj.x[k].col(i), out.traj.x[k]);
        const Vec hr = hi * out.costate.r[k].col(i);
        const double gap = (hr.dot(best.col(i)) - p.phi(best.col(i))) -
                           (hr.dot(u.values[k].col(i)) - p.phi(u.values[k].col(i)));
        residual = std::max(residual, gap / N);
      }
      u_next.values[k] = (1.0 - opt.theta) * u.values[k] + opt.theta * best;
    }

    const double update = u.max_abs_diff(u_next);
    const double cost = cost_discrete(p, out.traj, u);
    out.report.maximality_residuals.push_back(residual);
    out.report.control_updates.push_back(update);
    out.report.costs.push_back(cost);
    out.report.iterations = it + 1;

    if (cost - initial_cost > 10.0 * std::max(1.0, std::abs(initial_cost))) {
      out.report.abort_reason = "cost diverged";
      break;
    }
    u = u_next;
    if (update < opt.tol) {
      out.report.converged = true;
      break;
    }
  }

  out.u = u;
  out.traj = integrate_forward(p, u, x0, grid);
  out.costate = integrate_costate_backward(p, out.traj, u, grid);
  return out;
}

namespace detail {

/// Transposed Jacobian-vector product of the full-system drift map
/// X -> F(X, U) applied to the covector W (both d x N). Uses the analytic
/// measure differentials; the atom derivative of a mean-field functional is
/// 1/N times its measure differential at that atom.
inline Mat drift_vjp_x(const Problem& p, const Atoms& X, const Mat& U, const Mat& W) {
  const int d = p.dim();
  const int N = static_cast<int>(X.cols());
  Mat out = Mat::Zero(d, N);

  const bool skip_vx = p.v_is_zero();
  const bool skip_vpsi = p.v_psi_grad_zero();
  const bool skip_h = p.h_is_constant();
  const bool skip_hpsi = p.h_psi_grad_zero();

  for (int j = 0; j < N; ++j) {
    Vec acc = Vec::Zero(d);
    if (!skip_vx) acc += p.v_grad_x(X.col(j), X).transpose() * W.col(j);
    if (!skip_h) acc += p.h_grad_x(X.col(j), X) * U.col(j).dot(W.col(j));
    if (!skip_vpsi || !skip_hpsi) {
      Vec inter = Vec::Zero(d);
      for (int i = 0; i < N; ++i) {
        if (!skip_vpsi) inter += p.v_grad_psi(X.col(i), X, X.col(j)).transpose() * W.col(i);
        if (!skip_hpsi) inter += p.h_grad_psi(X.col(i), X, X.col(j)) * U.col(i).dot(W.col(i));
      }
      acc += inter / N;
    }
    out.col(j) = acc;
  }
  return out;
}

/// u-block of the transposed Jacobian: dF_i/du_i = h(x_i, psi) I.
inline Mat drift_vjp_u(const Problem& p, const Atoms& X, const Mat& W) {
  const int N = static_cast<int>(X.cols());
  Mat out(p.dim(), N);
  for (int i = 0; i < N; ++i) out.col(i) = p.h(X.col(i), X) * W.col(i);
  return out;
}

}  // namespace detail

/// Gradient of the discrete cost with respect to every control value, by
/// reverse-mode differentiation of the RK4 steps and the left-endpoint
/// quadrature. This is the exact adjoint of the discrete forward map, so it
/// matches finite differences of cost_discrete to truncation error.
inline std::vector<Mat> adjoint_gradient(const Problem& p, const TrajectoryBundle& traj,
                                         const ControlGrid& u, const TimeGrid& grid) {
  require(traj.grid.steps == grid.steps && u.steps() == grid.steps,
          "adjoint_gradient: grid mismatch");
  const double dt = grid.dt();
  const int S = grid.steps;
  const int N = traj.particles();
  const int d = p.dim();

  std::vector<Mat> grad(S, Mat::Zero(d, N));

  // lambda = dJ/dx_k, seeded by the terminal cost.
  Mat lambda = Mat::Zero(d, N);
  if (p.has_terminal_cost())
    for (int i = 0; i < N; ++i)
      lambda.col(i) = p.terminal_grad_psi(traj.x[S], traj.x[S].col(i)) / N;

  for (int k = S - 1; k >= 0; --k) {
    const Atoms& X = traj.x[k];
    const Mat& U = u.values[k];

    // Recompute the RK4 stages of step k.
    Mat K1 = detail::system_rhs(p, X, U);
    Mat X2 = X + 0.5 * dt * K1;
    Mat K2 = detail::system_rhs(p, X2, U);
    Mat X3 = X + 0.5 * dt * K2;
    Mat K3 = detail::system_rhs(p, X3, U);
    Mat X4 = X + dt * K3;

    const Mat& w = lambda;
    Mat b4 = (dt / 6.0) * w;
    Mat c4 = detail::drift_vjp_x(p, X4, U, b4);
    Mat b3 = (dt / 3.0) * w + dt * c4;
    Mat c3 = detail::drift_vjp_x(p, X3, U, b3);
    Mat b2 = (dt / 3.0) * w + 0.5 * dt * c3;
    Mat c2 = detail::drift_vjp_x(p, X2, U, b2);
    Mat b1 = (dt / 6.0) * w + 0.5 * dt * c2;
    Mat c1 = detail::drift_vjp_x(p, X, U, b1);

    grad[k] = detail::drift_vjp_u(p, X, b1) + detail::drift_vjp_u(p, X2, b2) +
              detail::drift_vjp_u(p, X3, b3) + detail::drift_vjp_u(p, X4, b4);
    for (int i = 0; i < N; ++i) grad[k].col(i) += (dt / N) * p.phi_grad(U.col(i));

    lambda += c1 + c2 + c3 + c4;
    if (!p.L_is_zero())
      for (int i = 0; i < N; ++i)
        lambda.col(i) += (dt / N) * p.L_grad_psi(X, X.col(i));
  }
  return grad;
}

struct DirectOptions {
  double initial_step = 1.0;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  double tol = 1e-8;   // stationarity: max projected step size
  int max_iter = 500;
};

struct DirectResult {
  ControlGrid u;
  std::vector<double> cost_history;  // monotone non-increasing
  bool converged = false;
  std::string stop_reason;
};

/// Projected gradient descent with Armijo backtracking on the discrete cost.
/// Projection onto K is nodewise; only strictly decreasing steps are taken.
inline DirectResult direct_optimize(const Problem& p, const Atoms& x0, const TimeGrid& grid,
                                    const ControlGrid& u_init, const DirectOptions& opt = {}) {
  require(u_init.in_set(p.control_set(), 1e-9), "direct_optimize: u_init not in K");
  const int N = static_cast<int>(x0.cols());

  DirectResult out;
  out.u = u_init;
  TrajectoryBundle traj = integrate_forward(p, out.u, x0, grid);
  double cost = cost_discrete(p, traj, out.u);
  out.cost_history.push_back(cost);

  for (int it = 0; it < opt.max_iter; ++it) {
    std::vector<Mat> g = adjoint_gradient(p, traj, out.u, grid);

    double step = opt.initial_step;
    bool accepted = false;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
      ControlGrid trial = out.u;
      double decrease_model = 0.0;  // <g, u - u_trial>
      double move = 0.0;
      for (int k = 0; k < grid.steps; ++k) {
        for (int i = 0; i < N; ++i) {
          Vec ui = p.control_set().project(out.u.values[k].col(i) - step * g[k].col(i));
          decrease_model += g[k].col(i).dot(out.u.values[k].col(i) - ui);
          move = std::max(move, (ui - out.u.values[k].col(i)).cwiseAbs().maxCoeff());
          trial.values[k].col(i) = ui;
        }
      }
      if (move < opt.tol && bt == 0) {
        out.converged = true;
        out.stop_reason = "stationary";
        return out;
      }
      TrajectoryBundle traj_trial = integrate_forward(p, trial, x0, grid);
      const double cost_trial = cost_discrete(p, traj_trial, trial);
      if (cost_trial <= cost - opt.armijo_c * decrease_model) {
        out.u = trial;
        traj = std::move(traj_trial);
        cost = cost_trial;
        out.cost_history.push_back(cost);
        accepted = true;
        break;
      }
      step *= opt.backtrack;
    }
    if (!accepted) {
      out.stop_reason = "line search failed";
      return out;
    }
  }
  out.stop_reason = "max iterations";
  return out;
}

}  // namespace mfc
