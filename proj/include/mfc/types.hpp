#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mfc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Atom sets are stored column-wise: a d x N matrix holds N points of R^d.
using Atoms = Eigen::MatrixXd;

using Rng = std::mt19937_64;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline double sqr(double x) { return x * x; }

}  // namespace mfc
