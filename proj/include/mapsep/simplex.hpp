#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

#include "mapsep/common.hpp"

namespace mapsep::lp {

enum class LpStatus { optimal, unbounded, iteration_limit };

struct LpSolution {
  LpStatus status = LpStatus::iteration_limit;
  double objective = 0.0;
  Eigen::VectorXd x;
  int iterations = 0;
};

// Dense primal simplex with Bland's rule:
//   maximize c.x  subject to  A x <= b,  x >= 0,
// restricted to b >= 0 so the all-slack basis is feasible and no phase-1 pass
// is needed. Bland's smallest-index pivoting rules out cycling on the highly
// degenerate tableaus this project produces (many zero right-hand sides).
inline LpSolution solve_standard_max(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                     const Eigen::VectorXd& c, int max_iterations = 100000) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (b.size() != m || c.size() != n) throw usage_error("solve_standard_max: shape mismatch");
  if (b.minCoeff() < 0.0)
    throw usage_error("solve_standard_max: requires nonnegative right-hand sides");

  constexpr double entry_tol = 1e-12;  // reduced-cost threshold
  constexpr double pivot_tol = 1e-11;  // minimum pivot magnitude

  // Tableau: m constraint rows + objective row; n structural + m slack
  // columns + RHS.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m).setIdentity();
  t.col(n + m).head(m) = b;
  t.row(m).head(n) = -c.transpose();

  std::vector<int> basis(m);
  std::iota(basis.begin(), basis.end(), n);

  LpSolution sol;
  for (int iter = 0; iter < max_iterations; ++iter) {
    int entering = -1;
    for (int j = 0; j < n + m; ++j) {
      if (t(m, j) < -entry_tol) {
        entering = j;
        break;
      }
    }
    if (entering < 0) {
      sol.status = LpStatus::optimal;
      sol.objective = t(m, n + m);
      sol.x = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < m; ++i)
        if (basis[i] < n) sol.x(basis[i]) = t(i, n + m);
      sol.iterations = iter;
      return sol;
    }

    int leaving = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      const double aij = t(i, entering);
      if (aij > pivot_tol) {
        const double ratio = t(i, n + m) / aij;
        if (leaving < 0 || ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leaving])) {
          leaving = i;
          best_ratio = ratio;
        }
      }
    }
    if (leaving < 0) {
      sol.status = LpStatus::unbounded;
      sol.iterations = iter;
      return sol;
    }

    t.row(leaving) /= t(leaving, entering);
    for (int i = 0; i <= m; ++i) {
      if (i == leaving) continue;
      const double f = t(i, entering);
      if (f != 0.0) t.row(i) -= f * t.row(leaving);
    }
    basis[leaving] = entering;
  }
  sol.status = LpStatus::iteration_limit;
  return sol;
}

}  // namespace mapsep::lp
