#pragma once

#include <iosfwd>
#include <vector>

#include "v2gflex/admm.hpp"

namespace v2g {

/// "up" asks the fleet to raise its net consumption above the baseline
/// (absorb energy); "down" asks it to lower net consumption (release).
enum class FlexDirection { up, down };
const char* to_string(FlexDirection d);

struct FlexCell {
  int hour = 0;
  double price_mwh = 0.0;
  FlexDirection direction = FlexDirection::up;
  double deviation_mw = 0.0;  // attained deviation from baseline within the hour
  double charge_cost = 0.0;   // stations' energy cost over the full horizon
  double soc_penalty = 0.0;   // Q
  double track_revenue = 0.0; // p_f * delivered deviation energy
  double total_cost = 0.0;    // charge + penalty - revenue
  SolveStatus status = SolveStatus::optimal;
  int iterations = 0;
};

struct FlexEnvelope {
  double dt_h = 0.25;
  Eigen::VectorXd baseline;    // fleet net power of the cost-only solve [kW]
  double baseline_charge_cost = 0.0;
  double baseline_soc_penalty = 0.0;
  std::vector<FlexCell> cells;

  void to_csv(std::ostream& os) const;
};

/// Sweeps hours x prices x directions. The baseline fixes each station to
/// pure cost minimization (no system objective); every cell re-solves the
/// decomposed problem with a linear flexibility price on that hour, asking
/// for an unreachable deviation so the attained value reveals the boundary.
/// Cells are independent; failed cells are marked, never fatal.
FlexEnvelope compute_envelope(const Scenario& sc, const std::vector<double>& prices_mwh,
                              const std::vector<int>& hours,
                              const std::vector<FlexDirection>& directions,
                              const FormulationOptions& opts, const AdmmParams& params,
                              int cell_workers = 1);

} // namespace v2g
