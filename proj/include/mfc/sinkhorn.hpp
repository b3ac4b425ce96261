#pragma once

#include <cmath>

#include "mfc/measures.hpp"
#include "mfc/types.hpp"

namespace mfc {

struct SinkhornResult {
  double value = 0.0;          // transport cost <C, plan> of the entropic plan
  bool converged = false;
  double marginal_error = 0.0; // L1 marginal violation at the last check
  int iterations = 0;
};

/// Dual potentials, reusable as a warm start between nearby instances.
struct SinkhornPotentials {
  Vec f, g;
  bool valid = false;
};

namespace detail {

inline double logsumexp(const Eigen::ArrayXd& t) {
  const double m = t.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((t - m).exp().sum());
}

}  // namespace detail

/// Entropic approximation of W1 between equal-weight empirical measures
/// (atom counts may differ; weights 1/N vs 1/M). Log-domain updates with
/// epsilon scaling. Converges when the L1 marginal violation drops below
/// `tol`; otherwise returns a flagged result after `max_iter` total updates.
/// The value carries a one-sided bias of order eps*log(N).
inline SinkhornResult w1_sinkhorn(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                  double eps, double tol = 1e-9, int max_iter = 10000,
                                  SinkhornPotentials* warm = nullptr) {
  require(eps > 0.0, "w1_sinkhorn: eps must be positive");
  require(a.dim() == b.dim(), "w1_sinkhorn: dimensions must agree");
  const int n = a.size(), m = b.size();

  Mat cost(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) cost(i, j) = (a.atoms().col(i) - b.atoms().col(j)).norm();

  const double loga = -std::log(static_cast<double>(n));
  const double logb = -std::log(static_cast<double>(m));

  Vec f = Vec::Zero(n), g = Vec::Zero(m);
  bool warm_started = warm && warm->valid && warm->f.size() == n && warm->g.size() == m;
  if (warm_started) {
    f = warm->f;
    g = warm->g;
  }

  // Epsilon scaling: start near the cost scale and shrink toward the target.
  std::vector<double> levels;
  const double cmax = cost.maxCoeff();
  if (!warm_started && cmax > 0.0) {
    for (double e = cmax / 2.0; e > eps * 4.0; e /= 4.0) levels.push_back(e);
  }
  levels.push_back(eps);

  SinkhornResult res;
  int iters = 0;
  auto update_f = [&](double e) {
    for (int i = 0; i < n; ++i) {
      Eigen::ArrayXd t = ((g.transpose() - cost.row(i)).array() / e) + logb;
      f(i) = -e * detail::logsumexp(t);
    }
  };
  auto update_g = [&](double e) {
    for (int j = 0; j < m; ++j) {
      Eigen::ArrayXd t = ((f - cost.col(j)).array() / e) + loga;
      g(j) = -e * detail::logsumexp(t);
    }
  };
  // Row-marginal L1 violation; columns are exact right after a g-update.
  auto row_violation = [&](double e) {
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::ArrayXd t = ((f(i) + g.transpose().array() - cost.row(i).array()) / e) + loga + logb;
      err += std::abs(t.exp().sum() - std::exp(loga));
    }
    return err;
  };

  for (std::size_t lev = 0; lev < levels.size() && iters < max_iter; ++lev) {
    const double e = levels[lev];
    const bool final_level = (lev + 1 == levels.size());
    const double level_tol = final_level ? tol : 1e-4;
    const int check_every = 4;
    int since_check = 0;
    while (iters < max_iter) {
      update_f(e);
      update_g(e);
      ++iters;
      if (++since_check >= check_every || iters >= max_iter) {
        since_check = 0;
        res.marginal_error = row_violation(e);
        if (res.marginal_error < level_tol) {
          if (final_level) res.converged = true;
          break;
        }
      }
      if (!final_level && iters >= static_cast<int>(50 * (lev + 1))) break;  // move on
    }
  }
  res.iterations = iters;

  double value = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::ArrayXd t = ((f(i) + g.transpose().array() - cost.row(i).array()) / eps) + loga + logb;
    value += (t.exp() * cost.row(i).transpose().array()).sum();
  }
  res.value = value;

  if (warm) {
    warm->f = f;
    warm->g = g;
    warm->valid = true;
  }
  return res;
}

}  // namespace mfc
