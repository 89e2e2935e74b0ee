#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "v2gflex/common.hpp"

namespace v2g {

/// Static parameters of one EV battery and charger connection.
struct VehicleSpec {
  std::string id;
  double capacity_kwh = 0.0;    // x_max
  double min_soc_kwh = 0.0;     // x_min
  double initial_soc_kwh = 0.0; // x at t=0
  double max_charge_kw = 0.0;
  double max_discharge_kw = 0.0;
  double eta_ch = 1.0;
  double eta_ds = 1.0;
  double tau_sd_h = kInf;       // self-discharge time constant, hours
  double consumption_kwh_per_km = 0.0;
  int home_station_id = 0;
  // Optional comfort floor on the SOC lower bound; negative means "use min_soc_kwh".
  double soc_floor_kwh = -1.0;

  double soc_floor() const {
    return soc_floor_kwh < 0.0 ? min_soc_kwh : std::max(min_soc_kwh, soc_floor_kwh);
  }
  void validate() const; // throws std::invalid_argument on bad data
};

/// One charging site: grid connection limits, local forecasts and tariffs.
struct StationSpec {
  int id = 0;
  int n_max_chargers = 1;
  double p_max_kw = 0.0; // upper grid power bound
  // Lower bound of the station power box. NaN means symmetric (-p_max_kw).
  double p_min_kw = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> base_load_kw; // length T
  std::vector<double> pv_kw;        // length T
  std::vector<double> buy_price;    // currency/kWh, length T
  std::vector<double> sell_price;   // currency/kWh, length T

  double power_lower() const { return std::isnan(p_min_kw) ? -p_max_kw : p_min_kw; }
  void validate(int T) const;
};

/// Discretized fleet mobility over the horizon.
///
/// l(t,v)=1 when vehicle v sits at its home station during step t.
/// e(t,v)>0 is the energy threshold the battery must meet at departure step t.
/// delta_e(t,v)>0 is the trip energy reintegrated into the dynamics at
/// arrival step t.
struct ScenarioTimeline {
  double dt_h = 0.25;
  int T = 0;
  Eigen::Matrix<int8_t, Eigen::Dynamic, Eigen::Dynamic> l; // T x n_v
  Eigen::SparseMatrix<double> e;                            // T x n_v
  Eigen::SparseMatrix<double> delta_e;                      // T x n_v

  int n_vehicles() const { return static_cast<int>(l.cols()); }
  bool present(int t, int v) const { return l(t, v) != 0; }
  void validate() const;
};

/// One raw booking row as found in operator exports.
struct BookingRecord {
  std::string vehicle_id;
  // Seconds since an arbitrary epoch; ingest only uses differences.
  std::int64_t reservation_start = 0;
  std::int64_t reservation_end = 0;
  std::int64_t drive_start = 0;
  std::int64_t drive_end = 0;
  double distance_km = 0.0;
  bool cancelled = false;
};

/// Dispatch schedule for the whole fleet, reconstructed from a solver run.
/// x is recomputed by exact propagation from u_c/u_d, so the dynamics hold
/// to machine precision; station_power is likewise recomputed from controls.
struct FleetSchedule {
  double dt_h = 0.25;
  Eigen::MatrixXd u_c;           // T x n_v  [kW]
  Eigen::MatrixXd u_d;           // T x n_v  [kW]
  Eigen::MatrixXd x;             // (T+1) x n_v  [kWh]
  Eigen::MatrixXd station_power; // T x n_s  [kW]

  double station_cost = 0.0; // sum over stations of C(p_s)
  double system_cost = 0.0;  // S(sum_s p_s)
  double soc_penalty = 0.0;  // Q(x)
  double objective() const { return station_cost + system_cost + soc_penalty; }

  int T() const { return static_cast<int>(u_c.rows()); }
  int n_vehicles() const { return static_cast<int>(u_c.cols()); }
  int n_stations() const { return static_cast<int>(station_power.cols()); }
  Eigen::VectorXd fleet_power() const {
    return station_power.rowwise().sum();
  }
};

} // namespace v2g
