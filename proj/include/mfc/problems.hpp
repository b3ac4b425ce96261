#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mfc/control_set.hpp"
#include "mfc/types.hpp"

namespace mfc {

using ParamMap = std::map<std::string, double>;

/// A controlled interacting-particle problem: drift v(x, psi), control
/// activation h(x, psi), running cost L(psi), optional terminal cost g(psi),
/// quadratic control cost phi(u) = (lambda/2)|u|^2 over a compact convex K,
/// and a deterministic initial sampler.
///
/// All fields are kernel-structured so that their measure differentials are
/// analytic. grad_psi evaluators return the local Wasserstein differential
/// at the probe point: on an empirical measure generated by atoms x_1..x_N it
/// equals N times the Euclidean partial gradient in the matching atom.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string id() const = 0;
  virtual std::string describe() const = 0;

  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  const ControlSet& control_set() const { return K_; }
  double phi_lambda() const { return phi_lambda_; }
  bool has_terminal_cost() const { return has_terminal_; }

  // Control cost and its Hamiltonian argmax. The maximizer of
  // <r_scaled, u> - phi(u) over K is the projection of r_scaled/lambda onto K,
  // unique because phi is strictly convex and K convex.
  double phi(const Vec& u) const { return 0.5 * phi_lambda_ * u.squaredNorm(); }
  Vec phi_grad(const Vec& u) const { return phi_lambda_ * u; }
  Vec phi_conjugate_argmax(const Vec& r_scaled) const {
    return K_.project(r_scaled / phi_lambda_);
  }

  virtual Vec v(const Vec& x, const Atoms& psi) const = 0;
  virtual Mat v_grad_x(const Vec& x, const Atoms& psi) const = 0;
  virtual Mat v_grad_psi(const Vec& x, const Atoms& psi, const Vec& probe) const = 0;

  virtual double h(const Vec& x, const Atoms& psi) const = 0;
  virtual Vec h_grad_x(const Vec& x, const Atoms& psi) const = 0;
  virtual Vec h_grad_psi(const Vec& x, const Atoms& psi, const Vec& probe) const = 0;

  virtual double L(const Atoms& psi) const = 0;
  virtual Vec L_grad_psi(const Atoms& psi, const Vec& probe) const = 0;

  virtual double terminal(const Atoms& /*psi*/) const { return 0.0; }
  virtual Vec terminal_grad_psi(const Atoms& /*psi*/, const Vec& /*probe*/) const {
    return Vec::Zero(dim_);
  }

  virtual Atoms sample_initial(int N, std::uint64_t seed) const = 0;

  // Structure flags: let integrators skip identically-zero blocks.
  virtual bool v_is_zero() const { return false; }
  virtual bool v_psi_grad_zero() const { return false; }
  virtual bool h_is_constant() const { return false; }
  virtual bool h_psi_grad_zero() const { return false; }
  virtual bool L_is_zero() const { return false; }

 protected:
  Problem(int dim, double horizon, ControlSet K, double phi_lambda, bool has_terminal)
      : dim_(dim), horizon_(horizon), K_(std::move(K)), phi_lambda_(phi_lambda),
        has_terminal_(has_terminal) {
    require(dim_ >= 1, "Problem: dimension must be >= 1");
    require(horizon_ > 0.0, "Problem: horizon must be positive");
    require(phi_lambda_ > 0.0, "Problem: control cost weight must be positive");
  }

  int dim_;
  double horizon_;
  ControlSet K_;
  double phi_lambda_;
  bool has_terminal_;
};

namespace detail {

inline double param(const ParamMap& p, const std::string& name, double fallback) {
  auto it = p.find(name);
  return it == p.end() ? fallback : it->second;
}

/// Symmetric 1D grid on [-1,1] including the endpoints. The extremes do not
/// move with N, so support bounds along a particle sweep stay N-independent.
inline Atoms symmetric_grid(int N) {
  require(N >= 1, "sample_initial: N must be >= 1");
  Atoms out(1, N);
  for (int i = 0; i < N; ++i)
    out(0, i) = (N == 1) ? 0.0 : -1.0 + 2.0 * i / (N - 1);
  return out;
}

}  // namespace detail

/// 1D variance-maximization benchmark: free dynamics (v = 0, h = 1), no
/// running interaction cost, terminal payoff rewarding spread around the
/// mean, quadratic control cost on K = [-M, M]. With lambda <= T the optimal
/// controls saturate at +-M and the optimal feedback jumps at the origin.
class VarianceModelProblem final : public Problem {
 public:
  explicit VarianceModelProblem(const ParamMap& params)
      : Problem(1, detail::param(params, "T", 1.0),
                ControlSet::box(1, detail::param(params, "M", 1.0)),
                detail::param(params, "lambda", 0.5), /*has_terminal=*/true) {}

  std::string id() const override { return "model_case"; }
  std::string describe() const override {
    return "1D variance maximization: v=0, h=1, terminal -1/2 int |x-mean|^2, "
           "K=[-M,M]; saturated non-Lipschitz optimal feedback when lambda <= T "
           "(params: lambda, M, T)";
  }

  Vec v(const Vec&, const Atoms&) const override { return Vec::Zero(1); }
  Mat v_grad_x(const Vec&, const Atoms&) const override { return Mat::Zero(1, 1); }
  Mat v_grad_psi(const Vec&, const Atoms&, const Vec&) const override { return Mat::Zero(1, 1); }

  double h(const Vec&, const Atoms&) const override { return 1.0; }
  Vec h_grad_x(const Vec&, const Atoms&) const override { return Vec::Zero(1); }
  Vec h_grad_psi(const Vec&, const Atoms&, const Vec&) const override { return Vec::Zero(1); }

  double L(const Atoms&) const override { return 0.0; }
  Vec L_grad_psi(const Atoms&, const Vec&) const override { return Vec::Zero(1); }

  double terminal(const Atoms& psi) const override {
    const double mean = psi.row(0).mean();
    return -0.5 * (psi.row(0).array() - mean).square().mean();
  }
  Vec terminal_grad_psi(const Atoms& psi, const Vec& probe) const override {
    Vec g(1);
    g(0) = -probe(0) + psi.row(0).mean();
    return g;
  }

  Atoms sample_initial(int N, std::uint64_t) const override {
    return detail::symmetric_grid(N);
  }

  bool v_is_zero() const override { return true; }
  bool v_psi_grad_zero() const override { return true; }
  bool h_is_constant() const override { return true; }
  bool h_psi_grad_zero() const override { return true; }
  bool L_is_zero() const override { return true; }
};

/// Alignment drift v(x,psi) = kappa (mean(psi) - x) with a bump activation
/// h(x,psi) = 1/(1 + |x - beta*mean(psi)|^2) and variance running cost.
/// beta = 0 gives the plain bump h(x) = 1/(1+|x|^2).
class AlignmentProblem final : public Problem {
 public:
  explicit AlignmentProblem(const ParamMap& params)
      : Problem(static_cast<int>(detail::param(params, "d", 1.0)),
                detail::param(params, "T", 1.0),
                ControlSet::box(static_cast<int>(detail::param(params, "d", 1.0)),
                                detail::param(params, "M", 1.0)),
                detail::param(params, "lambda", 1.0), /*has_terminal=*/false),
        kappa_(detail::param(params, "kappa", 1.0)),
        beta_(detail::param(params, "beta", 0.0)),
        weight_(detail::param(params, "weight", 1.0)) {}

  std::string id() const override { return "alignment"; }
  std::string describe() const override {
    return "alignment drift kappa*(mean - x), selective bump activation "
           "1/(1+|x-beta*mean|^2), variance running cost "
           "(params: d, kappa, beta, weight, lambda, M, T)";
  }

  Vec v(const Vec& x, const Atoms& psi) const override {
    return kappa_ * (psi.rowwise().mean() - x);
  }
  Mat v_grad_x(const Vec&, const Atoms&) const override {
    return -kappa_ * Mat::Identity(dim_, dim_);
  }
  Mat v_grad_psi(const Vec&, const Atoms&, const Vec&) const override {
    return kappa_ * Mat::Identity(dim_, dim_);
  }

  double h(const Vec& x, const Atoms& psi) const override {
    const Vec c = x - beta_ * psi.rowwise().mean();
    return 1.0 / (1.0 + c.squaredNorm());
  }
  Vec h_grad_x(const Vec& x, const Atoms& psi) const override {
    const Vec c = x - beta_ * psi.rowwise().mean();
    return -2.0 * c / sqr(1.0 + c.squaredNorm());
  }
  Vec h_grad_psi(const Vec& x, const Atoms& psi, const Vec&) const override {
    const Vec c = x - beta_ * psi.rowwise().mean();
    return 2.0 * beta_ * c / sqr(1.0 + c.squaredNorm());
  }

  // L(psi) = weight * Var(psi) = weight/2 * double integral of |x-y|^2.
  double L(const Atoms& psi) const override {
    const Vec mean = psi.rowwise().mean();
    return weight_ * ((psi.colwise() - mean).colwise().squaredNorm().mean());
  }
  Vec L_grad_psi(const Atoms& psi, const Vec& probe) const override {
    return 2.0 * weight_ * (probe - psi.rowwise().mean());
  }

  Atoms sample_initial(int N, std::uint64_t seed) const override {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Atoms out(dim_, N);
    for (int i = 0; i < N; ++i)
      for (int a = 0; a < dim_; ++a) out(a, i) = unif(rng);
    return out;
  }

 private:
  double kappa_, beta_, weight_;
};

/// No drift, unit activation; running cost drives the ensemble mean toward a
/// target: L(psi) = weight/2 |mean(psi) - a|^2 (double-kernel form with
/// l(x,y) = <x-a, y-a>/2). weight = 0 gives the pure control-cost problem.
class MeanTargetProblem final : public Problem {
 public:
  explicit MeanTargetProblem(const ParamMap& params)
      : Problem(static_cast<int>(detail::param(params, "d", 1.0)),
                detail::param(params, "T", 1.0),
                ControlSet::box(static_cast<int>(detail::param(params, "d", 1.0)),
                                detail::param(params, "M", 1.0)),
                detail::param(params, "lambda", 1.0), /*has_terminal=*/false),
        weight_(detail::param(params, "weight", 1.0)) {
    target_ = Vec::Constant(dim_, detail::param(params, "target", 1.0));
  }

  std::string id() const override { return "mean_target"; }
  std::string describe() const override {
    return "zero drift, unit activation, running cost weight/2*|mean - target|^2 "
           "(params: d, target, weight, lambda, M, T)";
  }

  Vec v(const Vec&, const Atoms&) const override { return Vec::Zero(dim_); }
  Mat v_grad_x(const Vec&, const Atoms&) const override { return Mat::Zero(dim_, dim_); }
  Mat v_grad_psi(const Vec&, const Atoms&, const Vec&) const override {
    return Mat::Zero(dim_, dim_);
  }

  double h(const Vec&, const Atoms&) const override { return 1.0; }
  Vec h_grad_x(const Vec&, const Atoms&) const override { return Vec::Zero(dim_); }
  Vec h_grad_psi(const Vec&, const Atoms&, const Vec&) const override {
    return Vec::Zero(dim_);
  }

  double L(const Atoms& psi) const override {
    return 0.5 * weight_ * (psi.rowwise().mean() - target_).squaredNorm();
  }
  Vec L_grad_psi(const Atoms& psi, const Vec&) const override {
    return weight_ * (psi.rowwise().mean() - target_);
  }

  Atoms sample_initial(int N, std::uint64_t seed) const override {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Atoms out(dim_, N);
    for (int i = 0; i < N; ++i)
      for (int a = 0; a < dim_; ++a) out(a, i) = unif(rng);
    return out;
  }

  bool v_is_zero() const override { return true; }
  bool v_psi_grad_zero() const override { return true; }
  bool h_is_constant() const override { return true; }
  bool h_psi_grad_zero() const override { return true; }
  bool L_is_zero() const override { return weight_ == 0.0; }

 private:
  double weight_;
  Vec target_;
};

struct ProblemInfo {
  std::string id;
  std::string family;  // particle | replicator
  std::string summary;
};

inline std::vector<ProblemInfo> problem_catalog() {
  return {
      {"model_case", "particle",
       VarianceModelProblem(ParamMap{}).describe()},
      {"alignment", "particle", AlignmentProblem(ParamMap{}).describe()},
      {"mean_target", "particle", MeanTargetProblem(ParamMap{}).describe()},
      {"replicator_markov", "replicator",
       "positions with uncontrolled label switching: d/dt lambda = Q(x,psi) lambda, "
       "column-zero-sum reversible rate matrix (params: n, q, d, lambda, M, T)"},
      {"replicator_entropic", "replicator",
       "positions with entropy-regularized replicator labels: d/dt lambda = "
       "S(c,psi) + eps*R(lambda) (params: n, eps, payoff_scale, d, lambda, M, T)"},
  };
}

inline std::shared_ptr<const Problem> make_problem(const std::string& id,
                                                   const ParamMap& params = {}) {
  if (id == "model_case") return std::make_shared<VarianceModelProblem>(params);
  if (id == "alignment") return std::make_shared<AlignmentProblem>(params);
  if (id == "mean_target") return std::make_shared<MeanTargetProblem>(params);
  throw std::invalid_argument("unknown particle problem id: " + id);
}

}  // namespace mfc
