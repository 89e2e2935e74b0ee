#include "v2gflex/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace v2g {

DiscreteDynamics discretize(const VehicleSpec& spec, double dt_h) {
  if (dt_h <= 0.0) throw std::invalid_argument("discretize: dt_h must be positive");
  if (spec.eta_ch <= 0.0 || spec.eta_ch > 1.0 || spec.eta_ds <= 0.0 || spec.eta_ds > 1.0)
    throw std::invalid_argument("discretize: efficiencies must lie in (0, 1]");
  if (!(spec.tau_sd_h > 0.0))
    throw std::invalid_argument("discretize: tau_sd_h must be positive");

  DiscreteDynamics dyn;
  dyn.dt_h = dt_h;
  if (std::isinf(spec.tau_sd_h)) {
    // A_c -> 0 limit: a = 1, B = dt * B_c.
    dyn.a = 1.0;
    dyn.b_ch = dt_h * spec.eta_ch;
    dyn.b_ds = dt_h / spec.eta_ds;
  } else {
    const double a_c = -1.0 / spec.tau_sd_h;
    dyn.a = std::exp(a_c * dt_h);
    const double gain = (dyn.a - 1.0) / a_c; // positive for a in (0,1)
    dyn.b_ch = gain * spec.eta_ch;
    dyn.b_ds = gain / spec.eta_ds;
  }
  return dyn;
}

} // namespace v2g
