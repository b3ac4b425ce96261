#include <gtest/gtest.h>

#include <cmath>

#include "mfc/meanfield.hpp"
#include "mfc/pmp.hpp"
#include "test_util.hpp"

using namespace mfc;

namespace {

Atoms atoms1d(std::initializer_list<double> xs) {
  Atoms a(1, static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) a(0, i++) = x;
  return a;
}

// Control-only problem with a vanished activation: the Hamiltonian reduces
// to -phi(u) and controls cannot influence the state.
class DeadActivationProblem final : public Problem {
 public:
  DeadActivationProblem()
      : Problem(1, 1.0, ControlSet::box(1, 1.0), 1.0, /*has_terminal=*/false) {}
  std::string id() const override { return "dead_activation"; }
  std::string describe() const override { return "test-only: h = 0"; }
  Vec v(const Vec&, const Atoms&) const override { return Vec::Zero(1); }
  Mat v_grad_x(const Vec&, const Atoms&) const override { return Mat::Zero(1, 1); }
  Mat v_grad_psi(const Vec&, const Atoms&, const Vec&) const override { return Mat::Zero(1, 1); }
  double h(const Vec&, const Atoms&) const override { return 0.0; }
  Vec h_grad_x(const Vec&, const Atoms&) const override { return Vec::Zero(1); }
  Vec h_grad_psi(const Vec&, const Atoms&, const Vec&) const override { return Vec::Zero(1); }
  double L(const Atoms&) const override { return 0.0; }
  Vec L_grad_psi(const Atoms&, const Vec&) const override { return Vec::Zero(1); }
  Atoms sample_initial(int N, std::uint64_t) const override { return Atoms::Zero(1, N); }
  bool v_is_zero() const override { return true; }
  bool h_is_constant() const override { return true; }
  bool h_psi_grad_zero() const override { return true; }
  bool L_is_zero() const override { return true; }
};

}  // namespace

TEST(HamiltonianN, ZeroEverything) {
  auto p = make_problem("mean_target", {{"weight", 0.0}});
  const Atoms z = Atoms::Zero(1, 3);
  EXPECT_DOUBLE_EQ(hamiltonian_n(*p, z, z, z), 0.0);
}

TEST(HamiltonianN, SingleParticleArithmetic) {
  auto p = make_problem("mean_target", {{"weight", 0.0}, {"lambda", 1.0}, {"M", 1.0}});
  EXPECT_DOUBLE_EQ(
      hamiltonian_n(*p, atoms1d({0.37}), atoms1d({2.0}), atoms1d({1.0})), 1.5);
}

TEST(HamiltonianN, ModelCaseArithmetic) {
  auto p = make_problem("model_case", {{"lambda", 0.5}});
  EXPECT_DOUBLE_EQ(hamiltonian_n(*p, atoms1d({-0.5, 0.5}), atoms1d({-2.0, 2.0}),
                                 atoms1d({-1.0, 1.0})),
                   1.75);
}

TEST(MaximizePointwise, ZeroCostateGivesZeroControl) {
  auto p = make_problem("model_case");
  const Mat u = maximize_hamiltonian_pointwise(*p, atoms1d({-0.3, 0.4}), Atoms::Zero(1, 2));
  EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MaximizePointwise, SaturatesAtBoxEdge) {
  auto p = make_problem("model_case", {{"lambda", 0.5}, {"M", 1.0}});
  const Mat u = maximize_hamiltonian_pointwise(*p, atoms1d({0.0}), atoms1d({2.0}));
  EXPECT_DOUBLE_EQ(u(0, 0), 1.0);
}

TEST(MaximizePointwise, DeadActivationIgnoresCostate) {
  DeadActivationProblem p;
  const Mat u = maximize_hamiltonian_pointwise(p, atoms1d({0.0, 1.0}), atoms1d({50.0, -3.0}));
  EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CostateBackward, ModelCaseCostateIsConstantInTime) {
  auto p = make_problem("model_case", {{"lambda", 0.5}});
  TimeGrid grid(100, 1.0);
  Atoms x0 = atoms1d({-0.5, 0.5});
  Mat c(1, 2);
  c << -1.0, 1.0;
  ControlGrid u = ControlGrid::constant(c, 100);
  TrajectoryBundle traj = integrate_forward(*p, u, x0, grid);
  CostateBundle costate = integrate_costate_backward(*p, traj, u, grid);

  // Terminal condition x_i(T) - mean(x(T)) holds exactly by construction.
  const Atoms xT = traj.terminal();
  for (int i = 0; i < 2; ++i)
    EXPECT_DOUBLE_EQ(costate.terminal()(0, i), xT(0, i) - xT.row(0).mean());
  // The costate velocity vanishes identically, so r is constant in time.
  for (int k = 0; k <= 100; ++k)
    EXPECT_EQ((costate.r[k] - costate.terminal()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CostateBackward, ZeroTerminalZeroGradientsGiveZeroCostate) {
  auto p = make_problem("mean_target", {{"weight", 0.0}});
  TimeGrid grid(25, 1.0);
  Rng rng(61);
  const Atoms x0 = mfc::testing::random_atoms(rng, 1, 4);
  const ControlGrid u = mfc::testing::random_controls(rng, p->control_set(), 4, 25);
  TrajectoryBundle traj = integrate_forward(*p, u, x0, grid);
  CostateBundle costate = integrate_costate_backward(*p, traj, u, grid);
  for (const Atoms& r : costate.r) EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CostateBackward, StableUnderStepHalvingWithOrderAtLeastThree) {
  auto p = make_problem("alignment",
                        {{"kappa", 0.8}, {"beta", 1.0}, {"weight", 0.5}, {"lambda", 1.0}});
  Atoms x0 = atoms1d({-0.7, 0.2, 0.9});
  auto costate_at_zero = [&](int S) {
    TimeGrid grid(S, 1.0);
    Mat c(1, 3);
    c << 0.3, -0.2, 0.1;
    ControlGrid u = ControlGrid::constant(c, S);
    TrajectoryBundle traj = integrate_forward(*p, u, x0, grid);
    return integrate_costate_backward(*p, traj, u, grid).r[0];
  };
  const Atoms ref = costate_at_zero(800);
  std::vector<double> errs;
  for (int S : {50, 100, 200})
    errs.push_back((costate_at_zero(S) - ref).cwiseAbs().maxCoeff());
  for (std::size_t i = 0; i + 1 < errs.size(); ++i)
    EXPECT_GE(std::log2(errs[i] / errs[i + 1]), 3.0);
}

TEST(AdjointGradient, MatchesFiniteDifferencesOnRandomInstances) {
  Rng rng(67);
  std::vector<std::shared_ptr<const Problem>> probs = {
      make_problem("model_case", {{"lambda", 0.5}}),
      make_problem("alignment", {{"kappa", 1.0}, {"beta", 1.0}, {"weight", 0.7}}),
      make_problem("mean_target", {{"target", 0.4}}),
  };
  for (const auto& p : probs) {
    const int N = 2 + static_cast<int>(rng() % 7);
    const int S = 5 + static_cast<int>(rng() % 16);
    TimeGrid grid(S, p->horizon());
    const Atoms x0 = mfc::testing::random_atoms(rng, p->dim(), N);
    // Interior controls so the finite-difference probe stays meaningful.
    ControlGrid u = mfc::testing::random_controls(rng, p->control_set(), N, S);
    for (auto& uk : u.values) uk *= 0.9;

    TrajectoryBundle traj = integrate_forward(*p, u, x0, grid);
    const auto adj = adjoint_gradient(*p, traj, u, grid);
    const auto fd = mfc::testing::fd_cost_gradient(*p, x0, grid, u);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < S; ++k) {
      num += (adj[k] - fd[k]).squaredNorm();
      den += fd[k].squaredNorm();
    }
    EXPECT_LE(std::sqrt(num / den), 1e-5);
  }
}

TEST(AdjointGradient, DeadActivationReducesToControlCostGradient) {
  DeadActivationProblem p;
  Rng rng(71);
  const int N = 3, S = 6;
  TimeGrid grid(S, 1.0);
  const Atoms x0 = mfc::testing::random_atoms(rng, 1, N);
  ControlGrid u = mfc::testing::random_controls(rng, p.control_set(), N, S);
  TrajectoryBundle traj = integrate_forward(p, u, x0, grid);
  const auto adj = adjoint_gradient(p, traj, u, grid);
  const double dt = grid.dt();
  for (int k = 0; k < S; ++k)
    for (int i = 0; i < N; ++i)
      EXPECT_NEAR(adj[k](0, i), dt * u.values[k](0, i) / N, 1e-15);
}

TEST(Sweep, TrivialProblemConvergesInOneIteration) {
  auto p = make_problem("mean_target", {{"weight", 0.0}});
  TimeGrid grid(10, 1.0);
  SweepResult res = forward_backward_sweep(*p, atoms1d({-0.4, 0.1, 0.8}), grid);
  EXPECT_TRUE(res.report.converged);
  EXPECT_EQ(res.report.iterations, 1);
  for (const Mat& uk : res.u.values) EXPECT_EQ(uk.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sweep, ModelCaseSaturatesAndCostateIsConstant) {
  auto p = make_problem("model_case", {{"lambda", 0.5}, {"M", 1.0}});
  TimeGrid grid(100, 1.0);
  SweepOptions opt;
  opt.tol = 1e-10;
  SweepResult res = forward_backward_sweep(*p, atoms1d({-0.5, 0.5}), grid, opt);
  ASSERT_TRUE(res.report.converged);
  for (const Mat& uk : res.u.values) {
    EXPECT_NEAR(uk(0, 0), -1.0, 1e-9);
    EXPECT_NEAR(uk(0, 1), 1.0, 1e-9);
  }
  // r_i = x_i(T) - mean, constant in time: (-1.5, 1.5) at the fixed point.
  EXPECT_NEAR(res.costate.r[0](0, 0), -1.5, 1e-9);
  EXPECT_NEAR(res.costate.r[0](0, 1), 1.5, 1e-9);
  for (int k = 0; k <= 100; ++k)
    EXPECT_LE((res.costate.r[k] - res.costate.terminal()).cwiseAbs().maxCoeff(), 1e-9);
  // Maximality residual at convergence.
  EXPECT_LE(res.report.maximality_residuals.back(), 10.0 * opt.tol);
}

TEST(Sweep, RelaxationReachesTheSameFixedPoint) {
  auto p = make_problem("model_case", {{"lambda", 0.5}});
  TimeGrid grid(50, 1.0);
  SweepOptions full, half;
  full.theta = 1.0;
  half.theta = 0.5;
  full.tol = half.tol = 1e-10;
  SweepResult a = forward_backward_sweep(*p, atoms1d({-0.5, 0.5}), grid, full);
  SweepResult b = forward_backward_sweep(*p, atoms1d({-0.5, 0.5}), grid, half);
  EXPECT_TRUE(a.report.converged);
  EXPECT_TRUE(b.report.converged);
  EXPECT_LE(a.u.max_abs_diff(b.u), 1e-8);
}

TEST(Sweep, UnsaturatedFixedPointHasVanishingGradient) {
  // lambda > T keeps the optimum interior; there the sweep fixed point is a
  // stationary point of the discrete cost as well.
  auto p = make_problem("model_case", {{"lambda", 3.0}});
  TimeGrid grid(50, 1.0);
  SweepOptions opt;
  opt.tol = 1e-12;
  SweepResult res = forward_backward_sweep(*p, atoms1d({-0.5, 0.5}), grid, opt);
  ASSERT_TRUE(res.report.converged);
  for (const Mat& uk : res.u.values) EXPECT_LT(uk.cwiseAbs().maxCoeff(), 1.0);  // interior

  const auto g = adjoint_gradient(*p, res.traj, res.u, grid);
  double worst = 0.0;
  for (const Mat& gk : g) worst = std::max(worst, gk.cwiseAbs().maxCoeff());
  EXPECT_LE(worst, 1e-10);
}

TEST(Direct, NoMoveAtOptimum) {
  auto p = make_problem("model_case", {{"lambda", 3.0}});
  TimeGrid grid(50, 1.0);
  SweepOptions sopt;
  sopt.tol = 1e-12;
  SweepResult sweep = forward_backward_sweep(*p, atoms1d({-0.5, 0.5}), grid, sopt);
  DirectOptions dopt;
  dopt.tol = 1e-7;
  DirectResult direct = direct_optimize(*p, atoms1d({-0.5, 0.5}), grid, sweep.u, dopt);
  EXPECT_TRUE(direct.converged);
  EXPECT_EQ(direct.cost_history.size(), 1u);
}

TEST(Direct, MonotoneCostHistory) {
  auto p = make_problem("mean_target", {{"target", 0.6}, {"lambda", 1.0}});
  TimeGrid grid(20, 1.0);
  Rng rng(73);
  const Atoms x0 = mfc::testing::random_atoms(rng, 1, 4);
  DirectResult res =
      direct_optimize(*p, x0, grid, ControlGrid::zero(1, 4, 20), DirectOptions{});
  ASSERT_GE(res.cost_history.size(), 2u);
  for (std::size_t i = 0; i + 1 < res.cost_history.size(); ++i)
    EXPECT_LE(res.cost_history[i + 1], res.cost_history[i] + 1e-15);
}

TEST(Direct, SweepFixedPointIsStationaryForDirect) {
  auto p = make_problem("model_case", {{"lambda", 0.5}});
  TimeGrid grid(100, 1.0);
  SweepOptions sopt;
  sopt.tol = 1e-10;
  SweepResult sweep = forward_backward_sweep(*p, atoms1d({-0.5, 0.5}), grid, sopt);
  const double sweep_cost = cost_discrete(*p, sweep.traj, sweep.u);
  DirectResult direct = direct_optimize(*p, atoms1d({-0.5, 0.5}), grid, sweep.u, DirectOptions{});
  EXPECT_LE(std::abs(direct.cost_history.back() - sweep_cost), 1e-6);
}
