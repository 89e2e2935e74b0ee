#pragma once

#include <optional>
#include <string>
#include <vector>

#include "v2gflex/dynamics.hpp"
#include "v2gflex/qp.hpp"
#include "v2gflex/scenario.hpp"

namespace v2g {

enum class BilinearMode { integer_vars, taylor, wang, none };
const char* to_string(BilinearMode m);
BilinearMode bilinear_mode_from_string(const std::string& s);

struct FormulationOptions {
  bool strictly_stationary = true;   // station sums over assigned fleets
  bool stations_not_downsized = true; // every assigned EV has a charger; drops c
  bool bidirectional = true;          // discharge allowed (V2G)
  BilinearMode bilinear_mode = BilinearMode::integer_vars;
  void validate() const;
};

/// Deterministic variable layout of the assembled problem:
/// per vehicle [u_c(T), u_d(T) if bidirectional, x(T+1)], then per-station
/// power blocks, the fleet aggregate, objective auxiliaries, SOC slacks and
/// binaries.
struct VariableLayout {
  int T = 0;
  int n_v = 0;
  int n_s = 0;
  bool bidirectional = true;
  std::vector<int> vehicle_base;
  std::vector<int> station_p_base;
  int aggregate_base = -1; // -1 when no system objective
  std::vector<int> station_y_base; // -1 per station without epigraph block
  std::vector<std::vector<int>> xc_var; // plug-state binaries, -1 where absent
  std::vector<std::vector<int>> c_var;  // charger-connection binaries

  int uc(int v, int t) const { return vehicle_base[v] + t; }
  int ud(int v, int t) const { return vehicle_base[v] + T + t; }
  int x(int v, int k) const {
    return vehicle_base[v] + (bidirectional ? 2 * T : T) + k;
  }
  int ps(int s, int t) const { return station_p_base[s] + t; }
  int g(int t) const { return aggregate_base + t; }
};

struct AssembledProblem {
  QpProblem qp;
  VariableLayout layout;
  std::vector<DiscreteDynamics> dynamics; // per vehicle
  std::vector<std::vector<int>> station_vehicles;
  double dt_h = 0.0;
};

/// Builds the full-fleet problem (dynamics, control/location limits, station
/// boxes, charger counts, objectives, soft SOC penalty). Binary annotations
/// appear only in integer mode (plug state) and when stations may be
/// downsized (charger connection).
AssembledProblem assemble(const Scenario& sc, const FormulationOptions& opts,
                          std::vector<std::string>* warnings = nullptr);

/// Reconstructs the fleet schedule from a solver point. SOC trajectories and
/// station power are recomputed from the controls, so dynamics and power
/// accounting hold exactly; solver_state_drift records how far the solver's
/// own state variables were from that reconstruction.
struct ExtractedSchedule {
  FleetSchedule schedule;
  double solver_state_drift = 0.0;
};
ExtractedSchedule extract_solution(const AssembledProblem& ap, const Eigen::VectorXd& x,
                                   const Scenario& sc);

/// Two-stage lexicographic strategy: minimize station energy cost, then
/// re-solve for the flattest profile whose cost stays within (1+tol) of the
/// stage-one optimum.
FleetSchedule lexicographic_peak_shave(const Scenario& sc, const FormulationOptions& opts,
                                       double tol = 1e-3, double qp_eps_abs = 1e-7,
                                       double qp_eps_rel = 1e-7);

} // namespace v2g
