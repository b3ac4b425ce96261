#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <thread>
#include <vector>

#include "mfc/pmp.hpp"
#include "mfc/sinkhorn.hpp"

namespace mfc {

/// Node-sampled generated measures of a solved run: nu_k = phase measure of
/// (x_i(t_k), r_i(t_k)) for k = 0..S, rho_k the same atoms carrying the
/// control payload u_i(t_k) for k = 0..S-1, and the projections psi_k, mu_k.
struct GeneratedPair {
  TimeGrid grid;
  std::vector<Atoms> x;  // S+1
  std::vector<Atoms> r;  // S+1
  std::vector<Mat> u;    // S

  int nodes() const { return static_cast<int>(x.size()); }
  int payload_nodes() const { return static_cast<int>(u.size()); }
  int particles() const { return static_cast<int>(x[0].cols()); }

  PhaseMeasure nu(int k) const { return PhaseMeasure(x[k], r[k]); }
  EmpiricalMeasure psi(int k) const { return EmpiricalMeasure(x[k]); }
  VectorMeasure rho(int k) const { return VectorMeasure(nu(k), u[k]); }
  VectorMeasure mu(int k) const { return VectorMeasure(psi(k), u[k]); }
};

inline GeneratedPair build_generated(const TrajectoryBundle& traj, const CostateBundle& costate,
                                     const ControlGrid& u) {
  require(costate.r.size() == traj.x.size(), "build_generated: costate/trajectory mismatch");
  require(u.steps() + 1 == static_cast<int>(traj.x.size()),
          "build_generated: control/trajectory mismatch");
  return GeneratedPair{traj.grid, traj.x, costate.r, u.values};
}

namespace detail {

/// Groups coincident atoms (exact coordinate match within 1e-12) and returns
/// sum of (group mass) * phi(mean payload over the group). On all-distinct
/// atoms this is exactly the plain average of phi over the payloads.
inline double phi_functional_grouped(const Mat& base, const Mat& payload, const Problem& p) {
  const int N = static_cast<int>(base.cols());
  constexpr double tol = 1e-12;
  std::vector<int> group(N, -1);
  std::vector<Vec> sums;
  std::vector<int> counts;
  std::vector<int> rep;
  for (int i = 0; i < N; ++i) {
    for (std::size_t g = 0; g < rep.size(); ++g) {
      if ((base.col(i) - base.col(rep[g])).cwiseAbs().maxCoeff() <= tol) {
        group[i] = static_cast<int>(g);
        break;
      }
    }
    if (group[i] < 0) {
      group[i] = static_cast<int>(rep.size());
      rep.push_back(i);
      sums.push_back(Vec::Zero(payload.rows()));
      counts.push_back(0);
    }
    sums[group[i]] += payload.col(i);
    counts[group[i]] += 1;
  }
  double acc = 0.0;
  for (std::size_t g = 0; g < rep.size(); ++g)
    acc += (static_cast<double>(counts[g]) / N) * p.phi(sums[g] / counts[g]);
  return acc;
}

}  // namespace detail

/// Convex integral functional of the control density relative to the base
/// measure, evaluated on equal-weight atoms.
inline double phi_functional(const VectorMeasure& rho, const PhaseMeasure& nu, const Problem& p) {
  const Mat base = nu.as_empirical().atoms();
  require(rho.base_atoms().rows() == base.rows() && rho.base_atoms().cols() == base.cols() &&
              (rho.base_atoms() - base).cwiseAbs().maxCoeff() == 0.0,
          "phi_functional: rho base must equal nu");
  return detail::phi_functional_grouped(base, rho.payload(), p);
}
inline double phi_functional(const VectorMeasure& mu, const EmpiricalMeasure& psi,
                             const Problem& p) {
  require(mu.base_atoms().rows() == psi.atoms().rows() &&
              mu.base_atoms().cols() == psi.atoms().cols() &&
              (mu.base_atoms() - psi.atoms()).cwiseAbs().maxCoeff() == 0.0,
          "phi_functional: mu base must equal psi");
  return detail::phi_functional_grouped(psi.atoms(), mu.payload(), p);
}

/// Worst adjacent-node W1 velocity of the phase measures, by exact assignment.
inline double lipschitz_estimate(const GeneratedPair& pair) {
  require(pair.nodes() >= 2, "lipschitz_estimate: needs at least two nodes");
  const double dt = pair.grid.dt();
  double worst = 0.0;
  for (int k = 0; k + 1 < pair.nodes(); ++k) {
    const double w = w1_exact_assignment(pair.nu(k).as_empirical(), pair.nu(k + 1).as_empirical());
    worst = std::max(worst, w / dt);
  }
  return worst;
}

namespace detail {

using BinKey = std::vector<std::int64_t>;

inline BinKey bin_of(const Vec& x, double delta) {
  BinKey key(x.size());
  for (int a = 0; a < x.size(); ++a) key[a] = static_cast<std::int64_t>(std::floor(x(a) / delta));
  return key;
}

}  // namespace detail

/// Mass-weighted mean payload spread within x-bins of side delta. A small
/// score is evidence that the control payload is a function of (t, x) alone:
/// the control density carries no costate dependence.
inline double r_independence_score_node(const Mat& x_atoms, const Mat& payload, double delta) {
  require(delta > 0.0, "r_independence_score: delta must be positive");
  const int N = static_cast<int>(x_atoms.cols());
  std::map<detail::BinKey, std::vector<int>> bins;
  for (int i = 0; i < N; ++i) bins[detail::bin_of(x_atoms.col(i), delta)].push_back(i);
  double acc = 0.0;
  for (const auto& [key, members] : bins) {
    if (members.size() < 2) continue;
    double spread = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        spread = std::max(spread, (payload.col(members[a]) - payload.col(members[b])).norm());
    acc += (static_cast<double>(members.size()) / N) * spread;
  }
  return acc;
}

/// Worst node score along the run.
inline double r_independence_score(const GeneratedPair& pair, double delta) {
  double worst = 0.0;
  for (int k = 0; k < pair.payload_nodes(); ++k)
    worst = std::max(worst, r_independence_score_node(pair.x[k], pair.u[k], delta));
  return worst;
}

/// Piecewise-constant-in-x control field: per node and x-bin, the mean
/// payload. Defined only on bins that contain atoms (the field is an
/// almost-everywhere object with respect to the state distribution).
struct ControlField {
  double delta = 0.0;
  std::vector<std::map<detail::BinKey, Vec>> bins;  // one map per payload node

  Vec eval(int k, const Vec& x) const {
    const auto& m = bins.at(k);
    auto it = m.find(detail::bin_of(x, delta));
    if (it == m.end())
      throw std::out_of_range("ControlField: no atoms in the bin at the requested point");
    return it->second;
  }
};

inline ControlField extract_control_field(const GeneratedPair& pair, double delta) {
  require(delta > 0.0, "extract_control_field: delta must be positive");
  ControlField field;
  field.delta = delta;
  field.bins.resize(pair.payload_nodes());
  for (int k = 0; k < pair.payload_nodes(); ++k) {
    std::map<detail::BinKey, std::pair<Vec, int>> acc;
    for (int i = 0; i < pair.particles(); ++i) {
      auto key = detail::bin_of(pair.x[k].col(i), delta);
      auto it = acc.find(key);
      if (it == acc.end())
        acc.emplace(key, std::make_pair(Vec(pair.u[k].col(i)), 1));
      else {
        it->second.first += pair.u[k].col(i);
        it->second.second += 1;
      }
    }
    for (auto& [key, sum_count] : acc)
      field.bins[k].emplace(key, sum_count.first / sum_count.second);
  }
  return field;
}

/// Mean-field Hamiltonian evaluated on a phase measure with control values
/// given per atom. Coincides with hamiltonian_n when the values come from a
/// feedback field evaluated at the atoms.
inline double limit_hamiltonian(const Problem& p, const PhaseMeasure& nu, const Mat& omega) {
  require(omega.cols() == nu.size() && omega.rows() == p.dim(),
          "limit_hamiltonian: control value shape mismatch");
  for (int i = 0; i < nu.size(); ++i)
    require(p.control_set().contains(omega.col(i), 1e-9),
            "limit_hamiltonian: control value outside K");
  return hamiltonian_n(p, nu.x(), nu.r(), omega);
}

/// Same Hamiltonian with the control given as a feedback map x -> u.
template <class F>
inline double limit_hamiltonian_field(const Problem& p, const PhaseMeasure& nu, F&& omega_of_x) {
  Mat omega(p.dim(), nu.size());
  for (int i = 0; i < nu.size(); ++i) omega.col(i) = omega_of_x(nu.x().col(i));
  return limit_hamiltonian(p, nu, omega);
}

using TrialField = std::function<Vec(int node, const Vec& x)>;

/// Random K-valued Lipschitz fields: clipped affine maps with Lipschitz
/// constant at most `slope`.
inline std::vector<TrialField> make_trial_fields(const Problem& p, int count, double slope,
                                                 std::uint64_t seed) {
  std::vector<TrialField> fields;
  Rng rng(seed);
  const int d = p.dim();
  const double M = p.control_set().radius;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int c = 0; c < count; ++c) {
    Vec a(d);
    Mat B(d, d);
    for (int i = 0; i < d; ++i) a(i) = M * unif(rng);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) B(i, j) = (slope / d) * unif(rng);
    const ControlSet K = p.control_set();
    fields.push_back([a, B, K](int, const Vec& x) { return K.project(a + B * x); });
  }
  return fields;
}

/// K-valued perturbations of an extracted field.
inline std::vector<TrialField> make_perturbed_fields(const Problem& p, const ControlField& base,
                                                     int count, double scale,
                                                     std::uint64_t seed) {
  std::vector<TrialField> fields;
  Rng rng(seed);
  const int d = p.dim();
  const double M = p.control_set().radius;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int c = 0; c < count; ++c) {
    Vec a(d);
    Mat B(d, d);
    for (int i = 0; i < d; ++i) a(i) = scale * M * unif(rng);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) B(i, j) = (scale / d) * unif(rng);
    const ControlSet K = p.control_set();
    fields.push_back([a, B, K, &base](int k, const Vec& x) {
      return K.project(base.eval(k, x) + a + B * x);
    });
  }
  return fields;
}

/// Worst Hamiltonian surplus of any trial field over the extracted field,
/// across all payload nodes. At a maximizer this is nonpositive up to
/// discretization error.
inline double maximality_check(const Problem& p, const GeneratedPair& pair,
                               const ControlField& field,
                               const std::vector<TrialField>& trials) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < pair.payload_nodes(); ++k) {
    const PhaseMeasure nu = pair.nu(k);
    Mat w(p.dim(), pair.particles());
    for (int i = 0; i < pair.particles(); ++i) w.col(i) = field.eval(k, pair.x[k].col(i));
    const double base = limit_hamiltonian(p, nu, w);
    for (const auto& trial : trials) {
      Mat omega(p.dim(), pair.particles());
      for (int i = 0; i < pair.particles(); ++i) omega.col(i) = trial(k, pair.x[k].col(i));
      worst = std::max(worst, limit_hamiltonian(p, nu, omega) - base);
    }
  }
  return worst;
}

/// Max difference quotient of the feedback x0 -> u(t_0) over adjacent initial
/// atoms (1D). Grows without bound along N for saturated bang-bang feedback.
inline double feedback_difference_quotient(const Atoms& x0, const Mat& u0) {
  require(x0.rows() == 1, "feedback_difference_quotient: 1D only");
  const int N = static_cast<int>(x0.cols());
  std::vector<int> idx(N);
  for (int i = 0; i < N; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return x0(0, a) < x0(0, b); });
  double worst = 0.0;
  for (int i = 0; i + 1 < N; ++i) {
    const double dx = x0(0, idx[i + 1]) - x0(0, idx[i]);
    if (dx <= 0.0) continue;
    worst = std::max(worst, (u0.col(idx[i + 1]) - u0.col(idx[i])).norm() / dx);
  }
  return worst;
}

struct StudyOptions {
  SweepOptions sweep;
  std::uint64_t seed = 1;
  double sinkhorn_eps = 1e-3;
  double binning_delta = 0.05;
  int maximality_trials = 20;
  double trial_slope = 2.0;
  int threads = 1;
};

struct ConvergenceRow {
  int N = 0;
  bool solver_converged = false;
  double cost = 0.0;
  double support_radius = 0.0;
  double lipschitz = 0.0;
  double w1_to_finest = 0.0;  // Sinkhorn across atom counts: approximate
  double r_independence = 0.0;
  double maximality_residual = 0.0;
  double phi_gap = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  int finest_N = 0;
};

struct StudyResult {
  ConvergenceReport report;
  std::vector<GeneratedPair> pairs;        // one per sweep entry
  std::vector<SweepReport> sweep_reports;  // one per sweep entry
};

/// Solves the problem along an increasing particle sweep with a shared
/// initial sampler and fills one diagnostic row per N. Distances to the
/// finest run use Sinkhorn (atom counts differ) and are approximate; all
/// same-N diagnostics are exact.
inline StudyResult convergence_study(const Problem& p, const std::vector<int>& n_sweep,
                                     const TimeGrid& grid, const StudyOptions& opt = {}) {
  require(!n_sweep.empty(), "convergence_study: empty sweep");
  for (std::size_t i = 0; i + 1 < n_sweep.size(); ++i)
    require(n_sweep[i] < n_sweep[i + 1], "convergence_study: sweep must be strictly increasing");

  const int count = static_cast<int>(n_sweep.size());
  std::vector<GeneratedPair> pairs(count, GeneratedPair{grid, {}, {}, {}});
  std::vector<SweepReport> sweep_reports(count);
  std::vector<ConvergenceRow> rows(count);

  auto solve_one = [&](int idx) {
    const int N = n_sweep[idx];
    ConvergenceRow row;
    row.N = N;
    const Atoms x0 = p.sample_initial(N, opt.seed);
    SweepResult sol = forward_backward_sweep(p, x0, grid, opt.sweep);
    row.solver_converged = sol.report.converged;
    row.cost = cost_discrete(p, sol.traj, sol.u);
    pairs[idx] = build_generated(sol.traj, sol.costate, sol.u);
    sweep_reports[idx] = sol.report;
    const GeneratedPair& pair = pairs[idx];

    for (int k = 0; k < pair.nodes(); ++k)
      row.support_radius = std::max(row.support_radius, support_radius(pair.nu(k)));
    row.lipschitz = lipschitz_estimate(pair);
    row.r_independence = r_independence_score(pair, opt.binning_delta);
    for (int k = 0; k < pair.payload_nodes(); ++k) {
      double mean_phi = 0.0;
      for (int i = 0; i < pair.particles(); ++i) mean_phi += p.phi(pair.u[k].col(i));
      mean_phi /= pair.particles();
      row.phi_gap = std::max(row.phi_gap, mean_phi - phi_functional(pair.rho(k), pair.nu(k), p));
    }
    ControlField field = extract_control_field(pair, opt.binning_delta);
    std::vector<TrialField> trials = make_trial_fields(p, opt.maximality_trials,
                                                       opt.trial_slope, opt.seed + 7 * N);
    trials.push_back([d = p.dim()](int, const Vec&) { return Vec::Zero(d); });
    row.maximality_residual = maximality_check(p, pair, field, trials);
    rows[idx] = row;
  };

  if (opt.threads > 1) {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int t = 0; t < opt.threads; ++t)
      workers.emplace_back([&]() {
        for (int idx = next.fetch_add(1); idx < count; idx = next.fetch_add(1)) solve_one(idx);
      });
    for (auto& w : workers) w.join();
  } else {
    for (int idx = 0; idx < count; ++idx) solve_one(idx);
  }

  // Distance-to-finest column, warm-starting the potentials across nodes.
  const GeneratedPair& finest = pairs[count - 1];
  for (int idx = 0; idx < count; ++idx) {
    SinkhornPotentials warm;
    double worst = 0.0;
    for (int k = 0; k < finest.nodes(); ++k) {
      SinkhornResult res = w1_sinkhorn(pairs[idx].nu(k).as_empirical(),
                                       finest.nu(k).as_empirical(), opt.sinkhorn_eps,
                                       1e-9, 10000, &warm);
      worst = std::max(worst, res.value);
    }
    rows[idx].w1_to_finest = worst;
  }

  return StudyResult{ConvergenceReport{rows, n_sweep.back()}, std::move(pairs),
                     std::move(sweep_reports)};
}

}  // namespace mfc
