#pragma once

#include <functional>

#include "v2gflex/qp.hpp"
#include "v2gflex/qp_solver.hpp"

namespace v2g {

struct MiqpSettings {
  double tol = 1e-6;         // absolute + relative incumbent/bound gap target
  int node_limit = 20000;
  double int_tol = 1e-5;     // integrality threshold on binary variables
  QpSettings qp;             // relaxation solver settings
  bool warn_large = true;    // warn above the desk-scale binary count guard
  double time_limit_s = 0.0; // 0 = unlimited
  // Called after each explored node with (nodes, popped bound, incumbent
  // objective or +inf). Diagnostics only.
  std::function<void(int, double, double)> on_node;

  MiqpSettings() {
    qp.eps_abs = 1e-8;
    qp.eps_rel = 1e-8;
  }
};

/// Best-first branch-and-bound for convex MIQPs with 0/1 variables.
/// QP relaxations provide lower bounds; a round-and-fix heuristic provides
/// incumbents at every explored node. Branches on the most fractional binary
/// (lowest index on ties). With no binaries this reduces to solve_qp.
QpSolution solve_miqp_bb(const QpProblem& p, const MiqpSettings& settings = {});
QpSolution solve_miqp_bb(const QpProblem& p, double tol, int node_limit);

/// Core loop on a persistent solver (keeps factorizations and warm starts
/// across calls). binary_rows[i] must be the row that bounds binary i to
/// [0,1]; base_l/base_u are the unfixed bounds. Used by the station
/// subproblems, which re-solve nearby MIQPs every outer iteration.
QpSolution branch_and_bound_on(SplittingQpSolver& solver, const Eigen::VectorXd& base_l,
                               const Eigen::VectorXd& base_u,
                               const std::vector<int>& binary_rows,
                               const std::vector<int>& binary_vars, int n_vars,
                               const MiqpSettings& settings,
                               const Eigen::VectorXd* warm_x = nullptr,
                               const Eigen::VectorXd* warm_y = nullptr);

} // namespace v2g
