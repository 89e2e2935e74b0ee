#pragma once

#include <Eigen/Dense>
#include <functional>

#include "v2gflex/monolithic.hpp"
#include "v2gflex/scenario.hpp"

namespace v2g {

/// First-order expansion of x (.) y around (x_prev, y_prev), evaluated at
/// (x_cur, y_cur), elementwise.
Eigen::VectorXd taylor_linearization(const Eigen::VectorXd& x_prev,
                                     const Eigen::VectorXd& y_prev,
                                     const Eigen::VectorXd& x_cur,
                                     const Eigen::VectorXd& y_cur);

/// Euclidean projection of one (a, b) pair onto {x >= 0, y >= 0, x*y = 0}:
/// the coordinate with the larger shifted value survives (clamped at zero),
/// the other drops to zero; ties keep the first coordinate.
std::pair<double, double> wang_projection(double a, double b);
Eigen::VectorXd wang_projection(const Eigen::VectorXd& stacked); // [x;y] halves

/// Two printed/derived readings of the relaxation's z-penalty; see the
/// algorithm notes in bilinear.cpp.
enum class TaylorForm { printed, derived };

/// Quadratic penalty the relaxation injects into the station subproblem,
/// expressed on the stacked control vector zvec = [u_c; u_d] (length 2T):
///   diagonal: 0.5*coeff*|| zvec - target ||^2
///   pairwise: 0.5*coeff*sum_t (pa_t*x_t + pb_t*y_t - pd_t)^2
struct RelaxPenalty {
  enum class Form { diagonal, pairwise } form = Form::diagonal;
  double coeff = 0.0;
  Eigen::VectorXd target;
  Eigen::VectorXd pa, pb, pd;
};

/// The subproblem minimizer hook: solves the station problem with the given
/// penalty folded in and returns the new stacked controls.
using StationSolveHook = std::function<Eigen::VectorXd(const RelaxPenalty&)>;

struct RelaxationState {
  BilinearMode mode = BilinearMode::taylor;
  TaylorForm taylor_form = TaylorForm::derived;
  bool wang_projects_copy = false; // printed variant: project z_tilde - lambda
  double rho_b = 1.0;
  double gamma_b = 1.0;
  double alpha = 1.0;
  int T = 0;

  Eigen::VectorXd z_prev, z_cur; // stacked controls, 2T
  Eigen::VectorXd w;             // taylor auxiliary, T
  Eigen::VectorXd lambda_t;      // taylor dual, T
  Eigen::VectorXd z_tilde;       // wang feasible copy, 2T
  Eigen::VectorXd lambda_w;      // wang dual, 2T

  static RelaxationState make(BilinearMode mode, int T, double rho_b, double gamma_b,
                              double alpha);
  void randomize(std::uint64_t seed); // optional random init
  double compl_residual() const;       // max_t u_c * u_d of z_cur
  double copy_compl_residual() const;  // max_t of the wang copy
};

/// One relaxation pass (one subproblem solve plus the analytic updates).
RelaxationState taylor_iterate(RelaxationState s, const StationSolveHook& solve);
RelaxationState wang_iterate(RelaxationState s, const StationSolveHook& solve);
RelaxationState relaxation_iterate(RelaxationState s, const StationSolveHook& solve);

/// Comparison objective: true costs plus the damping term, with every
/// augmented-Lagrangian penalty (outer and inner) excluded.
double compute_jc(const FleetSchedule& sched, const Scenario& sc, double gamma,
                  const Eigen::MatrixXd* u_c_prev = nullptr,
                  const Eigen::MatrixXd* u_d_prev = nullptr);

} // namespace v2g
