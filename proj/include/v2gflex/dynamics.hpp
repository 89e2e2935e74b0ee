#pragma once

#include "v2gflex/types.hpp"

namespace v2g {

/// Coefficients of the exactly discretized battery ODE
///   x_{t+1} = a * x_t + b_ch * u_c - b_ds * u_d - delta_e.
struct DiscreteDynamics {
  double a = 1.0;     // decay factor over one step
  double b_ch = 0.0;  // kWh gained per kW of charging over one step
  double b_ds = 0.0;  // kWh drained per kW of discharging over one step
  double dt_h = 0.0;
};

/// Exact discretization of the continuous battery model with self-discharge
/// rate -1/tau_sd and input gains [eta_ch, 1/eta_ds].
DiscreteDynamics discretize(const VehicleSpec& spec, double dt_h);

inline double propagate(double x_kwh, const DiscreteDynamics& dyn, double u_c_kw,
                        double u_d_kw, double delta_e_kwh = 0.0) {
  return dyn.a * x_kwh + dyn.b_ch * u_c_kw - dyn.b_ds * u_d_kw - delta_e_kwh;
}

} // namespace v2g
