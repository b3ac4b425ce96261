#pragma once

#include <algorithm>
#include <vector>

#include "mfc/assignment.hpp"
#include "mfc/types.hpp"

namespace mfc {

/// Equal-weight atomic probability measure: N atoms in R^d, each of mass 1/N.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(Atoms atoms) : atoms_(std::move(atoms)) {
    require(atoms_.cols() >= 1, "EmpiricalMeasure: needs at least one atom");
    require(atoms_.rows() >= 1, "EmpiricalMeasure: dimension must be >= 1");
  }

  int dim() const { return static_cast<int>(atoms_.rows()); }
  int size() const { return static_cast<int>(atoms_.cols()); }
  const Atoms& atoms() const { return atoms_; }
  Vec atom(int i) const { return atoms_.col(i); }

  Vec mean() const { return atoms_.rowwise().mean(); }
  double first_moment() const { return atoms_.colwise().norm().mean(); }

 private:
  Atoms atoms_;
};

/// Equal-weight atoms in phase space R^{2d}: (x_i, r_i) pairs stored split.
class PhaseMeasure {
 public:
  PhaseMeasure(Atoms x, Atoms r) : x_(std::move(x)), r_(std::move(r)) {
    require(x_.rows() == r_.rows() && x_.cols() == r_.cols(),
            "PhaseMeasure: x and r blocks must have identical shape");
    require(x_.cols() >= 1, "PhaseMeasure: needs at least one atom");
  }

  int dim() const { return static_cast<int>(x_.rows()); }  // d, not 2d
  int size() const { return static_cast<int>(x_.cols()); }
  const Atoms& x() const { return x_; }
  const Atoms& r() const { return r_; }

  /// The measure seen as atoms in R^{2d}, columns stacked (x; r).
  EmpiricalMeasure as_empirical() const {
    Atoms stacked(2 * dim(), size());
    stacked.topRows(dim()) = x_;
    stacked.bottomRows(dim()) = r_;
    return EmpiricalMeasure(stacked);
  }

 private:
  Atoms x_, r_;
};

/// Vector-valued measure: base atoms (state or phase space) carrying one
/// payload vector per atom, all of mass 1/N.
class VectorMeasure {
 public:
  VectorMeasure(Atoms base_atoms, Mat payload)
      : base_(std::move(base_atoms)), payload_(std::move(payload)) {
    require(base_.cols() == payload_.cols(),
            "VectorMeasure: payload count must equal atom count");
  }
  VectorMeasure(const EmpiricalMeasure& base, Mat payload)
      : VectorMeasure(base.atoms(), std::move(payload)) {}
  VectorMeasure(const PhaseMeasure& base, Mat payload)
      : VectorMeasure(base.as_empirical().atoms(), std::move(payload)) {}

  int size() const { return static_cast<int>(base_.cols()); }
  const Atoms& base_atoms() const { return base_; }
  const Mat& payload() const { return payload_; }

 private:
  Atoms base_;
  Mat payload_;
};

/// Max Euclidean norm over atoms.
inline double support_radius(const EmpiricalMeasure& m) {
  return m.atoms().colwise().norm().maxCoeff();
}
inline double support_radius(const PhaseMeasure& m) {
  return support_radius(m.as_empirical());
}

/// Drops the costate block of each atom (pi^1 pushforward).
inline EmpiricalMeasure push_x(const PhaseMeasure& m) { return EmpiricalMeasure(m.x()); }

/// Exact W1 between equal-weight 1D empirical measures with equal atom count:
/// sort both and average coordinate gaps. Stable sort; ties matched in index order.
inline double w1_exact_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require(a.dim() == 1 && b.dim() == 1, "w1_exact_1d: measures must be 1-dimensional");
  require(a.size() == b.size(), "w1_exact_1d: atom counts must agree");
  const int n = a.size();
  std::vector<double> sa(n), sb(n);
  for (int i = 0; i < n; ++i) {
    sa[i] = a.atoms()(0, i);
    sb[i] = b.atoms()(0, i);
  }
  std::stable_sort(sa.begin(), sa.end());
  std::stable_sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::abs(sa[i] - sb[i]);
  return acc / n;
}

constexpr int kAssignmentCap = 512;

/// Exact W1 between equal-weight empirical measures of equal N via optimal
/// assignment. O(N^3); refuses N beyond the cap.
inline double w1_exact_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                  int cap = kAssignmentCap) {
  require(a.dim() == b.dim(), "w1_exact_assignment: dimensions must agree");
  require(a.size() == b.size(), "w1_exact_assignment: atom counts must agree");
  require(a.size() <= cap,
          "w1_exact_assignment: N exceeds the exact-assignment cap; use w1_sinkhorn");
  const int n = a.size();
  Mat cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = (a.atoms().col(i) - b.atoms().col(j)).norm();
  return solve_assignment(cost) / n;
}

}  // namespace mfc
