#pragma once

#include <memory>
#include <string>
#include <vector>

#include "v2gflex/bilinear.hpp"
#include "v2gflex/monolithic.hpp"
#include "v2gflex/scenario.hpp"

namespace v2g {

/// Parameters of the station-decomposed sharing iteration. rho, gamma, rho_b
/// and gamma_b are dimensionless: powers are normalized internally by the
/// fleet mean charge limit, so tolerances and tuning transfer across fleet
/// sizes.
struct AdmmParams {
  double rho = 1.0;   // sharing penalty
  double gamma = 0.1; // damping on the previous control iterate
  double alpha = 1.0; // relaxation blend of successive iterates
  double eps_abs = 1e-6;
  double eps_rel = 1e-4;
  int max_iter = 800;
  bool fixed_iterations = false; // ignore residual stopping, run max_iter
  // Residual balancing (doubles/halves rho, rescales the dual accordingly).
  bool adaptive_rho = true;
  int rho_adapt_interval = 10;
  int max_rho_adaptations = 60;

  // Complementarity relaxation (taylor/wang modes). gamma_b weighs the
  // shrinkage of the linearized product, so it sits orders of magnitude
  // above rho_b (see tools: the tune subcommand reproduces these defaults).
  double rho_b = 1.0;
  double gamma_b = 1e5;
  TaylorForm taylor_form = TaylorForm::derived;
  bool wang_projects_copy = false;
  bool random_init = false;
  std::uint64_t seed = 0;

  int threads = 1;

  // Station subproblem solver.
  double qp_eps_abs = 1e-8;
  double qp_eps_rel = 1e-8;
  int qp_max_iter = 40000;
  double bb_tol = 1e-7;
  int bb_node_limit = 4000;
};

struct AdmmIterationStats {
  double r_norm = 0.0;      // stacked primal residual, normalized power units
  double s_norm = 0.0;      // stacked dual residual
  double eps_pri = 0.0;
  double eps_dual = 0.0;
  double jc = 0.0;          // comparison objective of the current iterate
  double compl_residual = 0.0;      // max u_c*u_d over the fleet [kW^2]
  double copy_compl_residual = 0.0; // wang feasible copy (exact 0 expected)
  double t_station_s = 0.0;
  double t_coord_s = 0.0;
};

struct AdmmRun {
  AdmmParams params;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  Eigen::VectorXd z;      // final average station profile [kW]
  Eigen::VectorXd lambda; // final scaled dual [kW]
  Eigen::VectorXd final_primal_gap; // p_bar - z at the recorded last iteration
  std::vector<AdmmIterationStats> history;
  int message_values_per_station_per_iter = 0; // always 2*T: r_u in, p_s out
  double power_scale = 1.0;
  double solve_time_s = 0.0;

  std::string to_json(int indent = 2) const;
};

struct AdmmResult {
  FleetSchedule schedule;
  AdmmRun run;
};

/// One station's subproblem with persistent factorization, warm starts and
/// per-station relaxation state. The coordinator talks to it through a
/// length-T reference series in and a length-T power profile out.
class StationSubproblem {
 public:
  StationSubproblem(const Scenario& sc, int station_index, const FormulationOptions& opts,
                    const AdmmParams& params, double power_scale);
  ~StationSubproblem();
  StationSubproblem(StationSubproblem&&) noexcept;

  struct Result {
    Eigen::VectorXd power;   // p_s(u) over the horizon [kW] - the message
    double station_cost = 0.0;   // C at the current iterate
    double soc_penalty = 0.0;    // Q at the current iterate
    double damping_term = 0.0;   // gamma/2 ||u - u_prev||^2 (physical units)
    double compl_residual = 0.0; // max u_c*u_d [kW^2]
    double copy_compl_residual = 0.0;
    int qp_iterations = 0;
    SolveStatus status = SolveStatus::optimal;
  };

  /// One outer iteration: solve with coupling reference r_u (length T).
  Result update(const Eigen::VectorXd& r_u);

  /// Refreshes the sharing penalty after a coordinator rho change.
  void set_rho_phys(double rho_phys);

  /// Initial power profile (zero controls).
  Eigen::VectorXd passive_power() const;

  /// Controls of the last iterate, fleet-indexed (T x n_vehicles_here).
  const Eigen::MatrixXd& u_c() const;
  const Eigen::MatrixXd& u_d() const;
  const std::vector<int>& vehicle_ids() const; // indices into the global fleet

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// z-update of the sharing iteration: prox of the system objective at
/// r_z = p_bar + lambda with weight n_s*rho_phys (rho_phys in physical power
/// units). Closed forms where available, kernel QP otherwise.
Eigen::VectorXd admm_z_update(const Eigen::VectorXd& p_bar, const Eigen::VectorXd& lambda,
                              double rho_phys, int n_s, const ObjectiveSpec& system,
                              double dt_h);

/// Scaled dual ascent: lambda + p_bar - z.
Eigen::VectorXd admm_dual_update(const Eigen::VectorXd& lambda, const Eigen::VectorXd& p_bar,
                                 const Eigen::VectorXd& z);

/// Full decomposed solve. Requires a strictly stationary formulation.
AdmmResult run_admm(const Scenario& sc, const FormulationOptions& opts,
                    const AdmmParams& params);

} // namespace v2g
