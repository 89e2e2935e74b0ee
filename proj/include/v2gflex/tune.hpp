#pragma once

#include <iosfwd>

#include "v2gflex/admm.hpp"

namespace v2g {

struct TuneTrial {
  double rho_b = 0.0;
  double gamma_b = 0.0;
  double alpha = 1.0;
  double jc_gap = 0.0;         // relative gap vs the integer-mode run
  double compl_residual = 0.0; // max u_c*u_d at termination [kW^2]
  int iterations = 0;
  double time_s = 0.0;
};

struct TuneResult {
  BilinearMode mode = BilinearMode::taylor;
  std::vector<TuneTrial> trials;
  TuneTrial best;
  double reference_objective = 0.0;
  void to_csv(std::ostream& os) const;
};

struct TuneConfig {
  BilinearMode mode = BilinearMode::taylor;
  int n_stations = 12;
  int vehicles_per_station = 12; // 144 EVs
  int horizon = 18;
  double dt_h = 0.25;
  int samples = 40;
  std::uint64_t seed = 7;
  int threads = 1;
  // Log-uniform search ranges.
  double rho_b_min = 1e-3, rho_b_max = 10.0;
  double gamma_b_min = 1e-3, gamma_b_max = 10.0;
  bool search_alpha = false; // alpha in [0.5, 1] when enabled (taylor only)
};

/// Random-search tuning of the relaxation parameters against the
/// integer-mode solution on one fixed instance. The best trial minimizes the
/// J_c gap among trials with acceptable complementarity residual.
TuneResult tune_relaxation(const TuneConfig& cfg, AdmmParams base);

} // namespace v2g
