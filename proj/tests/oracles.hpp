#pragma once

// Test-only reference implementations, independent of the production solve
// paths: a dense active-set enumeration QP oracle and small brute-force
// helpers. Deliberately slow and simple.

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "v2gflex/qp.hpp"

namespace v2g::test {

struct OracleResult {
  bool feasible = false;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// Globally solves min 1/2 x'Px + q'x s.t. l <= Ax <= u by enumerating all
/// 3^m activity patterns and solving the dense equality KKT system of each.
/// Only usable for tiny problems (m <= ~10). P must be positive definite.
OracleResult dense_qp_oracle(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                             const Eigen::MatrixXd& A, const Eigen::VectorXd& l,
                             const Eigen::VectorXd& u);

/// Same, operating on the canonical sparse problem (bounds rows included).
OracleResult dense_qp_oracle(const QpProblem& p);

/// Minimizes a scalar convex function on [lo, hi] by coarse grid + ternary
/// refinement.
double ternary_grid_min(const std::function<double(double)>& f, double lo, double hi,
                        int coarse = 2000, int refine_iters = 200);

} // namespace v2g::test
