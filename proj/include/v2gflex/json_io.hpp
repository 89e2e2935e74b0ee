#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "v2gflex/scenario.hpp"
#include "v2gflex/types.hpp"

namespace v2g {

// Scenario documents round-trip bit-exactly for doubles (shortest
// round-trip serialization).
std::string scenario_to_json(const Scenario& sc, int indent = 2);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& sc, const std::string& path);
Scenario load_scenario(const std::string& path);

/// Booking CSV: header
/// vehicle_id,reservation_start,reservation_end,drive_start,drive_end,distance_km,cancelled
/// with ISO-8601 timestamps (UTC).
std::vector<BookingRecord> read_booking_csv(std::istream& in);
std::vector<BookingRecord> read_booking_csv_file(const std::string& path);

/// Parses "YYYY-MM-DD[T ]HH:MM[:SS][Z]" to seconds since the Unix epoch.
std::int64_t parse_iso8601(const std::string& s);

/// Long-format schedule CSV: time,vehicle,u_c,u_d,soc.
void schedule_to_csv(const FleetSchedule& sched, const std::vector<VehicleSpec>& fleet,
                     std::ostream& os);
/// Summary JSON: per-station power series plus the cost breakdown.
std::string schedule_to_json(const FleetSchedule& sched, int indent = 2);

} // namespace v2g
