#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>

#include "v2gflex/qp.hpp"

namespace v2g {

struct QpSettings {
  double rho = 0.1;          // step size on constraints
  double sigma = 1e-6;       // primal regularization
  double alpha = 1.6;        // over-relaxation
  double eps_abs = 1e-6;
  double eps_rel = 1e-4;
  double eps_pinf = 1e-7;    // primal infeasibility certificate tolerance
  double eps_dinf = 1e-7;    // dual infeasibility certificate tolerance
  int max_iter = 50000;
  int check_every = 10;      // residual / certificate cadence
  bool adaptive_rho = true;
  int rho_adapt_interval = 100; // min iterations between step-size changes
  int max_rho_adaptations = 20; // hard cap; afterwards rho stays fixed
  // Active-set polish after first-order termination: solves the reduced KKT
  // of the rows the duals mark active, with iterative refinement.
  bool polish = true;
  double polish_delta = 1e-7;
  int polish_refine_iters = 4;
  int polish_interval = 250; // iterations between polish attempts
  double rho_eq_scale = 1e3; // stiffer step on equality rows
  int scaling_iters = 10;    // Ruiz equilibration passes; 0 disables
  double time_limit_s = 0.0; // 0 = unlimited
};

/// First-order operator-splitting QP solver (ADMM on the constraint set with
/// over-relaxation, Ruiz equilibration and a quasi-definite KKT
/// factorization). A solver instance keeps its factorization alive so nearby
/// problems - new linear cost, new bounds, warm starts - resolve cheaply.
class SplittingQpSolver {
 public:
  explicit SplittingQpSolver(const QpProblem& p, QpSettings settings = {});
  ~SplittingQpSolver();
  SplittingQpSolver(SplittingQpSolver&&) noexcept;
  SplittingQpSolver& operator=(SplittingQpSolver&&) noexcept;

  void update_lin_cost(const Eigen::VectorXd& q);
  void update_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
  /// New quadratic cost with the same sparsity pattern as at construction.
  void update_quad_cost(const Eigen::SparseMatrix<double>& P);

  void warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
  void cold_start();

  QpSolution solve();

  const QpSettings& settings() const;
  void set_tolerances(double eps_abs, double eps_rel);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around SplittingQpSolver. The problem must
/// not declare binary variables; use solve_miqp_bb for those.
QpSolution solve_qp(const QpProblem& p, double tol_abs = 1e-6, double tol_rel = 1e-4,
                    int max_iter = 50000);
QpSolution solve_qp(const QpProblem& p, const QpSettings& settings);

} // namespace v2g
