#include <doctest.h>

#include <sstream>

#include "v2gflex/json_io.hpp"
#include "v2gflex/scenario.hpp"

using namespace v2g;

namespace {

VehicleSpec small_ev(const std::string& id = "ev0", double cap = 40.0) {
  VehicleSpec v;
  v.id = id;
  v.capacity_kwh = cap;
  v.min_soc_kwh = 0.1 * cap;
  v.initial_soc_kwh = 0.5 * cap;
  v.max_charge_kw = 11;
  v.max_discharge_kw = 11;
  v.eta_ch = 0.95;
  v.eta_ds = 0.95;
  v.consumption_kwh_per_km = 0.15;
  v.home_station_id = 0;
  return v;
}

BookingRecord trip(const std::string& id, std::int64_t start_s, std::int64_t end_s,
                   double km) {
  BookingRecord r;
  r.vehicle_id = id;
  r.reservation_start = start_s;
  r.reservation_end = end_s;
  r.drive_start = start_s;
  r.drive_end = end_s;
  r.distance_km = km;
  return r;
}

} // namespace

TEST_CASE("ingest: single trip places e at departure and delta_e at return") {
  // 40 km at 0.15 kWh/km = 6 kWh; trip from 2h to 4h on a 15-minute grid.
  auto tl = ingest_bookings({trip("ev0", 2 * 3600, 4 * 3600, 40.0)}, {small_ev()}, 0.25, 32);
  CHECK(tl.T == 32);
  // Absent during bins [8, 16).
  for (int t = 0; t < 32; ++t) CHECK(tl.present(t, 0) == (t < 8 || t >= 16));
  CHECK(tl.e.coeff(7, 0) == doctest::Approx(6.0));
  CHECK(tl.delta_e.coeff(16, 0) == doctest::Approx(6.0));
  CHECK(tl.e.nonZeros() == 1);
  CHECK(tl.delta_e.nonZeros() == 1);
}

TEST_CASE("ingest: zero records leaves an idle fleet") {
  auto tl = ingest_bookings({}, {small_ev()}, 0.25, 16);
  for (int t = 0; t < 16; ++t) CHECK(tl.present(t, 0));
  CHECK(tl.e.nonZeros() == 0);
  CHECK(tl.delta_e.nonZeros() == 0);
}

TEST_CASE("ingest: overlapping reservation is cut to the previous drive end") {
  // A reserves [1h, 3h] and drives until 3h; B reserves from 2h30 but the
  // car only returns at 3h: B's start is cut to 3h.
  BookingRecord a = trip("ev0", 1 * 3600, 3 * 3600, 10.0);
  BookingRecord b = trip("ev0", 9000, 4 * 3600, 10.0); // 2.5h
  b.drive_start = 3 * 3600;
  b.reservation_start = 9000;
  auto tl = ingest_bookings({a, b}, {small_ev()}, 0.25, 20);
  // No double-absence: occupancy bins [4,12) for A, then [12,16) for B.
  for (int t = 0; t < 20; ++t) {
    const bool absent = (t >= 4 && t < 16);
    CHECK(tl.present(t, 0) == !absent);
  }
  // Identical to ingesting the pre-cut record set (idempotent normalization).
  BookingRecord b2 = b;
  b2.reservation_start = 3 * 3600;
  auto tl2 = ingest_bookings({a, b2}, {small_ev()}, 0.25, 20);
  CHECK((tl.l == tl2.l));
  CHECK(tl.e.toDense().isApprox(tl2.e.toDense()));
  CHECK(tl.delta_e.toDense().isApprox(tl2.delta_e.toDense()));
}

TEST_CASE("ingest: rejects unknown vehicles, clamps oversized trips, flags sub-bin") {
  CHECK_THROWS_WITH_AS(ingest_bookings({trip("ghost", 0, 3600, 5)}, {small_ev()}, 0.25, 8),
                       doctest::Contains("record 0"), std::invalid_argument);

  std::vector<std::string> warnings;
  auto tl = ingest_bookings({trip("ev0", 3600, 2 * 3600, 1000.0)}, {small_ev()}, 0.25, 16,
                            &warnings);
  CHECK(tl.e.coeff(3, 0) == doctest::Approx(40.0)); // clamped to capacity
  REQUIRE(!warnings.empty());
  CHECK(warnings[0].find("clamped") != std::string::npos);

  warnings.clear();
  auto tl2 = ingest_bookings({trip("ev0", 3600, 3600 + 60, 2.0)}, {small_ev()}, 0.25, 16,
                             &warnings);
  int absent = 0;
  for (int t = 0; t < 16; ++t) absent += tl2.present(t, 0) ? 0 : 1;
  CHECK(absent == 1); // rounded up to exactly one bin
  CHECK(!warnings.empty());
}

TEST_CASE("ingest: cancelled and rideless reservations are dropped") {
  BookingRecord c = trip("ev0", 3600, 7200, 10.0);
  c.cancelled = true;
  BookingRecord no_ride = trip("ev0", 3 * 3600, 4 * 3600, 5.0);
  no_ride.drive_end = no_ride.drive_start;
  auto tl = ingest_bookings({c, no_ride}, {small_ev()}, 0.25, 24);
  for (int t = 0; t < 24; ++t) CHECK(tl.present(t, 0));
}

TEST_CASE("generate: deterministic and strictly stationary") {
  auto a = generate_scenario(3, 4, 48, 0.25, 99, carsharing_usage_profile());
  auto b = generate_scenario(3, 4, 48, 0.25, 99, carsharing_usage_profile());
  CHECK((a.timeline.l == b.timeline.l));
  CHECK(a.timeline.e.toDense().isApprox(b.timeline.e.toDense(), 0));
  for (int v = 0; v < a.n_vehicles(); ++v)
    CHECK(a.fleet[v].home_station_id == v / 4);
  a.validate();
}

TEST_CASE("generate: zero usage means everyone stays home") {
  auto sc = generate_scenario(2, 3, 24, 0.5, 5, std::vector<double>(24, 0.0));
  for (int t = 0; t < 24; ++t)
    for (int v = 0; v < 6; ++v) CHECK(sc.timeline.present(t, v));
}

TEST_CASE("generate: absent fraction tracks the usage profile mean") {
  const int n_v = 1000, T = 96;
  auto sc = generate_scenario(10, 100, T, 0.25, 1234, std::vector<double>(24, 0.21));
  long absent = 0;
  for (int t = 0; t < T; ++t)
    for (int v = 0; v < n_v; ++v) absent += sc.timeline.present(t, v) ? 0 : 1;
  const double frac = static_cast<double>(absent) / (static_cast<double>(T) * n_v);
  CHECK(frac == doctest::Approx(0.21).epsilon(0.25)); // within 5 percentage points
  CHECK(std::abs(frac - 0.21) < 0.05);
}

TEST_CASE("generate: departures and returns alternate with matching energy") {
  for (std::uint64_t seed : {1ULL, 2ULL, 77ULL}) {
    auto sc = generate_scenario(2, 5, 64, 0.25, seed, carsharing_usage_profile());
    for (int v = 0; v < sc.n_vehicles(); ++v) {
      double pending_e = -1.0;
      for (int t = 0; t < sc.timeline.T; ++t) {
        const double de = sc.timeline.delta_e.coeff(t, v);
        const double e = sc.timeline.e.coeff(t, v);
        if (de > 0.0) {
          REQUIRE(pending_e >= 0.0); // a departure must precede每 return
          CHECK(de == doctest::Approx(pending_e));
          pending_e = -1.0;
        }
        if (e > 0.0) {
          CHECK(pending_e < 0.0); // no two departures without a return between
          pending_e = e;
          CHECK(sc.timeline.present(t, v)); // departure step is the last present bin
          if (t + 1 < sc.timeline.T) CHECK(!sc.timeline.present(t + 1, v));
        }
      }
    }
  }
}

TEST_CASE("assign_pv: zero power, scaling, determinism") {
  auto sc = generate_scenario(4, 4, 96, 0.25, 3, carsharing_usage_profile());
  auto z = assign_pv(sc.stations, 0.0, 11, 0.25);
  for (const auto& st : z)
    for (double p : st.pv_kw) CHECK(p == 0.0);

  auto with = assign_pv(sc.stations, 2.0, 11, 0.25);
  auto again = assign_pv(sc.stations, 2.0, 11, 0.25);
  bool any = false;
  for (size_t s = 0; s < with.size(); ++s) {
    CHECK(with[s].pv_kw == again[s].pv_kw);
    double peak = 0.0;
    for (double p : with[s].pv_kw) peak = std::max(peak, p);
    if (peak > 0.0) {
      any = true;
      CHECK(peak == doctest::Approx(2.0 * with[s].n_max_chargers));
      // Shape matches the explicit clear-sky table (4 steps per hour).
      for (int t = 0; t < 96; ++t) {
        const int h = t / 4;
        CHECK(with[s].pv_kw[t] ==
              doctest::Approx(2.0 * with[s].n_max_chargers * solar_curve_table()[h]));
      }
    }
  }
  CHECK(any);
}

TEST_CASE("scenario json round-trips bit-exactly") {
  auto sc = generate_scenario(2, 3, 24, 0.25, 17, carsharing_usage_profile());
  sc.objectives.system.kind = ObjectiveKind::track_profile;
  sc.objectives.system.reference.assign(24, 1.2345678901234567);
  const std::string j1 = scenario_to_json(sc);
  Scenario rt = scenario_from_json(j1);
  const std::string j2 = scenario_to_json(rt);
  CHECK(j1 == j2);
  CHECK(rt.fleet[0].initial_soc_kwh == sc.fleet[0].initial_soc_kwh);
}

TEST_CASE("booking csv parsing") {
  std::istringstream in(
      "vehicle_id,reservation_start,reservation_end,drive_start,drive_end,distance_km,"
      "cancelled\n"
      "ev0,2020-01-06T08:00:00,2020-01-06T10:00:00,2020-01-06T08:05:00,2020-01-06T09:55:00,"
      "23.5,0\n"
      "ev0,2020-01-06 12:00:00,2020-01-06 13:00:00,2020-01-06 12:00:00,2020-01-06 12:30:00,"
      "5,true\n");
  auto recs = read_booking_csv(in);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].distance_km == doctest::Approx(23.5));
  CHECK(recs[0].drive_end - recs[0].drive_start == 110 * 60);
  CHECK(!recs[0].cancelled);
  CHECK(recs[1].cancelled);
  CHECK(parse_iso8601("1970-01-01T00:00:00") == 0);
  CHECK(parse_iso8601("1970-01-02T00:00:00Z") == 86400);
}
