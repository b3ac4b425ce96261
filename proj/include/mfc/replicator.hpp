#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mfc/control_set.hpp"
#include "mfc/simulate.hpp"
#include "mfc/types.hpp"

namespace mfc {

enum class ReplicatorVariant { Markov, Entropic };

/// Multi-label particle systems: positions x_i in R^d driven by controls
/// (v = 0, h = 1), labels lambda_i evolving by an uncontrolled field.
///
/// Markov variant: d/dt lambda = Q lambda with a column-zero-sum rate matrix
/// (off-diagonal rate q, reversible w.r.t. the uniform distribution); the
/// label lives on the probability simplex.
///
/// Entropic variant: d/dt lambda = S(c, psi) + eps * R(lambda), where S is
/// the replicator field of the payoff J(x, u, x') = payoff_scale *
/// exp(-|x-x'|^2) * <u, e_1> integrated against the ensemble, and R is the
/// entropy drift (mean(lambda log lambda) - log lambda) lambda. The label is
/// a density w.r.t. the uniform reference eta: bounded between label_min and
/// label_max with unit eta-mass.
class ReplicatorProblem {
 public:
  ReplicatorProblem(ReplicatorVariant variant, const ParamMap& params)
      : variant_(variant),
        dim_(static_cast<int>(detail::param(params, "d", 1.0))),
        n_labels_(static_cast<int>(detail::param(params, "n", variant == ReplicatorVariant::Markov ? 2.0 : 3.0))),
        horizon_(detail::param(params, "T", 1.0)),
        K_(ControlSet::box(dim_, detail::param(params, "M", 1.0))),
        phi_lambda_(detail::param(params, "lambda", 1.0)),
        rate_(detail::param(params, "q", 1.0)),
        eps_(detail::param(params, "eps", 0.5)),
        payoff_scale_(detail::param(params, "payoff_scale", 1.0)),
        label_min_(detail::param(params, "label_min", 1e-3)),
        label_max_(detail::param(params, "label_max", 1e3)) {
    require(n_labels_ >= 2, "ReplicatorProblem: needs at least two labels");
  }

  std::string id() const {
    return variant_ == ReplicatorVariant::Markov ? "replicator_markov" : "replicator_entropic";
  }
  ReplicatorVariant variant() const { return variant_; }
  int dim() const { return dim_; }
  int labels() const { return n_labels_; }
  double horizon() const { return horizon_; }
  const ControlSet& control_set() const { return K_; }
  double phi_lambda() const { return phi_lambda_; }
  double phi(const Vec& u) const { return 0.5 * phi_lambda_ * u.squaredNorm(); }

  /// Uniform reference weights eta on the label set.
  double eta() const { return 1.0 / n_labels_; }

  /// eta-mass of a label: 1 on the invariant manifold of both variants.
  double label_mass(const Vec& lambda) const { return lambda.mean(); }

  Mat rate_matrix(const Vec& /*x*/, const Atoms& /*psi_x*/) const {
    Mat Q = Mat::Constant(n_labels_, n_labels_, rate_);
    Q.diagonal().setConstant(-rate_ * (n_labels_ - 1));
    return Q;
  }

  /// Label velocity of particle i given the full ensemble of positions.
  Vec label_rhs(const Vec& x, const Vec& lambda, const Atoms& xs) const {
    if (variant_ == ReplicatorVariant::Markov) return rate_matrix(x, xs) * lambda;

    // Entropic: payoff against the ensemble. J is zero except on label 1,
    // where it is payoff_scale * exp(-|x - x'|^2).
    const int N = static_cast<int>(xs.cols());
    double a = 0.0;
    for (int m = 0; m < N; ++m) a += std::exp(-(x - xs.col(m)).squaredNorm());
    a *= payoff_scale_ / N;
    Vec A = Vec::Zero(n_labels_);
    A(0) = a;
    const double B = eta() * lambda.dot(A);
    Vec S = (A.array() - B) * lambda.array();

    const double mean_llog = eta() * (lambda.array() * lambda.array().log()).sum();
    Vec R = (mean_llog - lambda.array().log()) * lambda.array();
    return S + eps_ * R;
  }

  /// Validity of a label for this variant; tol covers integration drift.
  bool label_valid(const Vec& lambda, double tol) const {
    if (variant_ == ReplicatorVariant::Markov)
      return (lambda.array() >= -tol).all() && std::abs(lambda.sum() - 1.0) <= tol;
    return (lambda.array() >= label_min_ - tol).all() &&
           (lambda.array() <= label_max_ + tol).all() &&
           std::abs(label_mass(lambda) - 1.0) <= tol;
  }

  std::string describe() const {
    if (variant_ == ReplicatorVariant::Markov)
      return "positions with uncontrolled label switching (params: n, q, d, lambda, M, T)";
    return "positions with entropy-regularized replicator labels "
           "(params: n, eps, payoff_scale, d, lambda, M, T)";
  }

  Atoms sample_initial_x(int N, std::uint64_t seed) const {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Atoms out(dim_, N);
    for (int i = 0; i < N; ++i)
      for (int a = 0; a < dim_; ++a) out(a, i) = unif(rng);
    return out;
  }

  Mat sample_initial_labels(int N, std::uint64_t seed) const {
    Mat out(n_labels_, N);
    if (variant_ == ReplicatorVariant::Markov) {
      out.setZero();
      for (int i = 0; i < N; ++i) out((i + static_cast<int>(seed)) % n_labels_, i) = 1.0;
      return out;
    }
    for (int i = 0; i < N; ++i) {
      Vec lam(n_labels_);
      for (int j = 0; j < n_labels_; ++j)
        lam(j) = 1.0 + 0.3 * std::cos(2.0 * M_PI * (j + 1) * (i + 1 + static_cast<double>(seed % 97)) / n_labels_);
      out.col(i) = lam / label_mass(lam);  // unit eta-mass
    }
    return out;
  }

 private:
  ReplicatorVariant variant_;
  int dim_, n_labels_;
  double horizon_;
  ControlSet K_;
  double phi_lambda_;
  double rate_, eps_, payoff_scale_, label_min_, label_max_;
};

struct ReplicatorTrajectory {
  TimeGrid grid;
  std::vector<Atoms> x;    // S+1 entries, d x N
  std::vector<Mat> label;  // S+1 entries, n x N
  int renormalizations = 0;

  int particles() const { return static_cast<int>(x[0].cols()); }
};

/// RK4 on the coupled (x, lambda) system; positions follow dx/dt = u
/// (controls act only on the position block). Labels are renormalized only
/// when the conserved mass drifts beyond 1e-10 (counted), and integration
/// aborts if a label leaves its invariant set by more than 1e-6.
inline ReplicatorTrajectory integrate_replicator(const ReplicatorProblem& p, const ControlGrid& u,
                                                 const Atoms& x0, const Mat& lambda0,
                                                 const TimeGrid& grid) {
  const int N = static_cast<int>(x0.cols());
  require(lambda0.cols() == N && lambda0.rows() == p.labels(),
          "integrate_replicator: label shape mismatch");
  require(u.steps() == grid.steps, "integrate_replicator: control/grid mismatch");
  for (int i = 0; i < N; ++i)
    require(p.label_valid(lambda0.col(i), 1e-9), "integrate_replicator: invalid initial label");

  ReplicatorTrajectory out{grid, {x0}, {lambda0}, 0};
  const double dt = grid.dt();
  Atoms X = x0;
  Mat Lam = lambda0;

  auto label_field = [&p](const Atoms& Xs, const Mat& Ls) {
    Mat d(Ls.rows(), Ls.cols());
    for (int i = 0; i < Ls.cols(); ++i) d.col(i) = p.label_rhs(Xs.col(i), Ls.col(i), Xs);
    return d;
  };

  for (int k = 0; k < grid.steps; ++k) {
    const Mat& U = u.values[k];
    Mat kx1 = U, kl1 = label_field(X, Lam);
    Mat kl2 = label_field(X + 0.5 * dt * kx1, Lam + 0.5 * dt * kl1);
    Mat kl3 = label_field(X + 0.5 * dt * kx1, Lam + 0.5 * dt * kl2);
    Mat kl4 = label_field(X + dt * kx1, Lam + dt * kl3);
    X += dt * U;  // dx/dt = u is constant within the step
    Lam += (dt / 6.0) * (kl1 + 2.0 * kl2 + 2.0 * kl3 + kl4);

    for (int i = 0; i < N; ++i) {
      const double mass = (p.variant() == ReplicatorVariant::Markov) ? Lam.col(i).sum()
                                                                     : p.label_mass(Lam.col(i));
      if (std::abs(mass - 1.0) > 1e-10) {
        Lam.col(i) /= mass;
        ++out.renormalizations;
      }
      if (!p.label_valid(Lam.col(i), 1e-6))
        throw std::runtime_error("integrate_replicator: label left its invariant set at step " +
                                 std::to_string(k + 1));
    }
    out.x.push_back(X);
    out.label.push_back(Lam);
  }
  return out;
}

/// Running cost of a replicator run: control cost only (no interaction term
/// in the catalog entries).
inline double cost_replicator(const ReplicatorProblem& p, const ReplicatorTrajectory& traj,
                              const ControlGrid& u) {
  const double dt = traj.grid.dt();
  const int N = traj.particles();
  double acc = 0.0;
  for (int k = 0; k < traj.grid.steps; ++k) {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += p.phi(u.values[k].col(i));
    acc += dt * s / N;
  }
  return acc;
}

/// Entropy of a label density w.r.t. the uniform reference.
inline double label_entropy(const ReplicatorProblem& p, const Vec& lambda) {
  return -p.eta() * (lambda.array() * lambda.array().log()).sum();
}

inline std::shared_ptr<const ReplicatorProblem> make_replicator_problem(const std::string& id,
                                                                        const ParamMap& params = {}) {
  if (id == "replicator_markov")
    return std::make_shared<ReplicatorProblem>(ReplicatorVariant::Markov, params);
  if (id == "replicator_entropic")
    return std::make_shared<ReplicatorProblem>(ReplicatorVariant::Entropic, params);
  throw std::invalid_argument("unknown replicator problem id: " + id);
}

}  // namespace mfc
