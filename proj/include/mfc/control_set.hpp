#pragma once

#include <vector>

#include "mfc/types.hpp"

namespace mfc {

/// Admissible control set K: box [-M, M]^d or Euclidean ball of radius M.
/// Compact, convex, contains the origin.
struct ControlSet {
  enum class Kind { Box, Ball };

  Kind kind = Kind::Box;
  int dim = 1;
  double radius = 1.0;  // M

  static ControlSet box(int d, double M) {
    require(M > 0.0, "ControlSet: M must be positive");
    return ControlSet{Kind::Box, d, M};
  }
  static ControlSet ball(int d, double M) {
    require(M > 0.0, "ControlSet: M must be positive");
    return ControlSet{Kind::Ball, d, M};
  }

  Vec project(const Vec& u) const {
    if (kind == Kind::Box) return u.cwiseMax(-radius).cwiseMin(radius);
    const double nrm = u.norm();
    if (nrm <= radius) return u;
    return u * (radius / nrm);
  }

  bool contains(const Vec& u, double tol = 0.0) const {
    if (kind == Kind::Box) return (u.array().abs() <= radius + tol).all();
    return u.norm() <= radius + tol;
  }

  /// m equispaced values on [-M, M], endpoints included (m >= 2).
  std::vector<double> axis_mesh(int m) const {
    require(m >= 2, "ControlSet: mesh needs at least two points");
    std::vector<double> pts(m);
    for (int i = 0; i < m; ++i) pts[i] = -radius + 2.0 * radius * i / (m - 1);
    return pts;
  }
};

}  // namespace mfc
