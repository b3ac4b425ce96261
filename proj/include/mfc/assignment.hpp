#pragma once

#include <limits>
#include <vector>

#include "mfc/types.hpp"

namespace mfc {

// Minimum-cost perfect matching on a dense square cost matrix.
// Shortest augmenting path with dual potentials, O(n^3).
// Returns the matched cost sum; if `col_of_row` is given it receives the
// optimal assignment (row i -> column col_of_row[i]).
inline double solve_assignment(const Mat& cost, std::vector<int>* col_of_row = nullptr) {
  const int n = static_cast<int>(cost.rows());
  require(cost.cols() == n && n >= 1, "solve_assignment: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based internals; column 0 is the virtual unmatched column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  if (col_of_row) col_of_row->assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    total += cost(p[j] - 1, j - 1);
    if (col_of_row) (*col_of_row)[p[j] - 1] = j - 1;
  }
  return total;
}

}  // namespace mfc
