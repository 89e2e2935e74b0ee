#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "v2gflex/objectives.hpp"
#include "v2gflex/types.hpp"

namespace v2g {

/// Full problem instance: fleet, stations, mobility timeline and objectives.
struct Scenario {
  std::vector<VehicleSpec> fleet;
  std::vector<StationSpec> stations;
  ScenarioTimeline timeline;
  ObjectiveConfig objectives;

  int n_vehicles() const { return static_cast<int>(fleet.size()); }
  int n_stations() const { return static_cast<int>(stations.size()); }
  /// Vehicle indices homed at station s (station order = stations vector).
  std::vector<int> vehicles_at(int station_id) const;
  void validate() const;
};

/// Discretizes booking records onto the horizon grid. Cancelled and
/// zero-drive records are dropped; overlapping reservations are cut to the
/// end of the previous drive; trip energy is distance * consumption clamped
/// to capacity. Sub-bin reservations round up to one bin. The grid origin is
/// midnight (UTC day boundary) of the earliest normalized reservation.
ScenarioTimeline ingest_bookings(const std::vector<BookingRecord>& records,
                                 const std::vector<VehicleSpec>& fleet, double dt_h,
                                 int horizon_steps,
                                 std::vector<std::string>* warnings = nullptr);

/// Synthetic scenario generator. usage_profile holds 24 hourly probabilities
/// of a vehicle being reserved; the generated absent fraction tracks its
/// mean. Deterministic for a fixed seed; strictly stationary by construction.
Scenario generate_scenario(int n_stations, int vehicles_per_station, int T, double dt_h,
                           std::uint64_t seed, const std::vector<double>& usage_profile);

/// Probabilistically equips stations with PV (probability 1/2 per station,
/// nominal power = power_per_charger_kw * n_max_chargers, clear-sky shape).
std::vector<StationSpec> assign_pv(std::vector<StationSpec> stations,
                                   double power_per_charger_kw, std::uint64_t seed,
                                   double dt_h = 0.25);

/// Diurnal reservation-probability curve of a typical station-based car
/// sharing fleet (mean about 0.21, afternoon peak).
const std::vector<double>& carsharing_usage_profile();

/// Normalized clear-sky PV production by hour of day (peak 1.0 at noon).
/// This explicit table is the reference for PV series construction.
const std::array<double, 24>& solar_curve_table();

} // namespace v2g
