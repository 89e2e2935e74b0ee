#include "v2gflex/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace v2g {

std::vector<int> Scenario::vehicles_at(int station_id) const {
  std::vector<int> out;
  for (int v = 0; v < n_vehicles(); ++v)
    if (fleet[v].home_station_id == station_id) out.push_back(v);
  return out;
}

void Scenario::validate() const {
  timeline.validate();
  if (static_cast<int>(fleet.size()) != timeline.n_vehicles())
    throw std::invalid_argument("scenario: fleet size != timeline columns");
  for (const auto& v : fleet) {
    v.validate();
    bool found = false;
    for (const auto& s : stations) found |= s.id == v.home_station_id;
    if (!found)
      throw std::invalid_argument("scenario: vehicle " + v.id + " references unknown station");
  }
  for (const auto& s : stations) s.validate(timeline.T);
  objectives.station.validate(timeline.T);
  objectives.system.validate(timeline.T);
  if (objectives.soc_penalty_k <= 0.0)
    throw std::invalid_argument("scenario: soc_penalty_k must be positive");
}

namespace {

// Deterministic uniform in [0,1) independent of libstdc++ distribution details.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double lognormal(std::mt19937_64& rng, double median, double sigma) {
  // Box-Muller.
  const double u1 = std::max(u01(rng), 1e-300), u2 = u01(rng);
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return median * std::exp(sigma * z);
}

struct Trip {
  std::int64_t start = 0, end = 0; // seconds
  double energy_kwh = 0.0;
};

} // namespace

ScenarioTimeline ingest_bookings(const std::vector<BookingRecord>& records,
                                 const std::vector<VehicleSpec>& fleet, double dt_h,
                                 int horizon_steps, std::vector<std::string>* warnings) {
  if (horizon_steps < 2) throw std::invalid_argument("ingest_bookings: horizon must be >= 2");
  if (dt_h <= 0.0) throw std::invalid_argument("ingest_bookings: dt_h must be positive");
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };

  std::map<std::string, int> vehicle_index;
  for (int v = 0; v < static_cast<int>(fleet.size()); ++v) vehicle_index[fleet[v].id] = v;

  // Normalize records: drop cancelled / rideless, order drives, widen the
  // reservation to cover the drive.
  struct Norm {
    std::int64_t res_start, res_end, drv_start, drv_end;
    double distance_km;
    int vehicle;
  };
  std::vector<std::vector<Norm>> per_vehicle(fleet.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto it = vehicle_index.find(r.vehicle_id);
    if (it == vehicle_index.end())
      throw std::invalid_argument("ingest_bookings: record " + std::to_string(i) +
                                  " references unknown vehicle '" + r.vehicle_id + "'");
    if (r.cancelled) continue;
    if (r.drive_end <= r.drive_start) continue; // no ride recorded
    Norm n;
    n.drv_start = r.drive_start;
    n.drv_end = r.drive_end;
    n.res_start = std::min(r.reservation_start, r.drive_start);
    n.res_end = std::max(r.reservation_end, r.drive_end);
    n.distance_km = std::max(r.distance_km, 0.0);
    n.vehicle = it->second;
    per_vehicle[it->second].push_back(n);
  }

  std::int64_t t0 = 0;
  bool any = false;
  for (auto& recs : per_vehicle) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const Norm& a, const Norm& b) { return a.drv_start < b.drv_start; });
    for (auto& r : recs) {
      if (!any || r.res_start < t0) t0 = r.res_start;
      any = true;
    }
  }
  t0 = any ? (t0 / 86400) * 86400 : 0; // midnight of the earliest day
  const double dt_sec = dt_h * 3600.0;

  const int T = horizon_steps;
  const int n_v = static_cast<int>(fleet.size());
  ScenarioTimeline tl;
  tl.dt_h = dt_h;
  tl.T = T;
  tl.l.setOnes(T, n_v);
  std::vector<Eigen::Triplet<double>> e_trip, de_trip;

  for (int v = 0; v < n_v; ++v) {
    auto& recs = per_vehicle[v];
    // Cut overlapping reservations to the end of the previous drive.
    for (size_t i = 1; i < recs.size(); ++i) {
      if (recs[i].res_start < recs[i - 1].drv_end) recs[i].res_start = recs[i - 1].drv_end;
      if (recs[i].res_start >= recs[i].res_end) {
        warn("vehicle " + fleet[v].id + ": reservation swallowed by previous drive, dropped");
        recs[i].res_end = recs[i].res_start; // degenerate, skipped below
      }
    }
    for (const auto& r : recs) {
      if (r.res_end <= r.res_start) continue;
      int a = static_cast<int>(std::floor((r.res_start - t0) / dt_sec));
      int bfin = static_cast<int>(std::ceil((r.res_end - t0) / dt_sec));
      if (bfin <= a) bfin = a + 1;
      if (r.res_end - r.res_start < dt_sec)
        warn("vehicle " + fleet[v].id + ": reservation shorter than one step, rounded up");
      if (a >= T || bfin <= 0) continue; // outside horizon
      const int a_cl = std::max(a, 0);
      const int b_cl = std::min(bfin, T);
      for (int t = a_cl; t < b_cl; ++t) tl.l(t, v) = 0;

      double energy = r.distance_km * fleet[v].consumption_kwh_per_km;
      if (energy > fleet[v].capacity_kwh) {
        warn("vehicle " + fleet[v].id + ": trip energy " + std::to_string(energy) +
             " kWh exceeds capacity, clamped");
        energy = fleet[v].capacity_kwh;
      }
      if (a < 1) continue; // departed before the horizon: no threshold, no drop
      e_trip.emplace_back(a - 1, v, energy); // threshold on the state leaving step a-1
      if (bfin < T)                          // returns inside the horizon
        de_trip.emplace_back(bfin, v, energy);
    }
  }

  tl.e.resize(T, n_v);
  tl.e.setFromTriplets(e_trip.begin(), e_trip.end(),
                       [](double a, double b) { return std::max(a, b); });
  tl.delta_e.resize(T, n_v);
  tl.delta_e.setFromTriplets(de_trip.begin(), de_trip.end());
  return tl;
}

const std::vector<double>& carsharing_usage_profile() {
  // Bell over the day, afternoon peak, mean ~ 0.21.
  static const std::vector<double> p = {
      0.06, 0.05, 0.04, 0.04, 0.05, 0.08, 0.13, 0.19, 0.25, 0.29, 0.32, 0.34,
      0.35, 0.36, 0.36, 0.35, 0.33, 0.31, 0.28, 0.24, 0.19, 0.14, 0.10, 0.08};
  return p;
}

const std::array<double, 24>& solar_curve_table() {
  static const std::array<double, 24> c = {0.0,  0.0,  0.0,  0.0,  0.0,  0.0,
                                           0.05, 0.15, 0.32, 0.52, 0.72, 0.90,
                                           1.0,  0.96, 0.84, 0.66, 0.45, 0.26,
                                           0.11, 0.03, 0.0,  0.0,  0.0,  0.0};
  return c;
}

namespace {

std::vector<double> tariff_preset(int variant, int T, double dt_h, bool sell) {
  std::vector<double> out(T);
  for (int t = 0; t < T; ++t) {
    const int h = static_cast<int>(std::floor(t * dt_h)) % 24;
    double buy;
    if (variant == 0) {
      buy = (h >= 7 && h < 22) ? 0.30 : 0.18; // day/night tariff
    } else {
      const double s = std::sin((h - 4.0) / 24.0 * 2.0 * M_PI);
      buy = 0.22 + 0.10 * s; // smooth diurnal swing peaking in the evening
    }
    out[t] = sell ? std::max(buy - 0.14, 0.04) : buy;
  }
  return out;
}

std::vector<double> diurnal_base_load(int chargers, int T, double dt_h) {
  std::vector<double> out(T);
  for (int t = 0; t < T; ++t) {
    const double h = std::fmod(t * dt_h, 24.0);
    const double bell = std::exp(-0.5 * std::pow((h - 18.0) / 4.0, 2.0));
    out[t] = chargers * (0.4 + 1.2 * bell);
  }
  return out;
}

} // namespace

Scenario generate_scenario(int n_stations, int vehicles_per_station, int T, double dt_h,
                           std::uint64_t seed, const std::vector<double>& usage_profile) {
  if (n_stations < 1 || vehicles_per_station < 1)
    throw std::invalid_argument("generate_scenario: counts must be positive");
  if (T < 2) throw std::invalid_argument("generate_scenario: T must be >= 2");
  if (dt_h <= 0.0) throw std::invalid_argument("generate_scenario: dt_h must be positive");
  if (usage_profile.size() != 24)
    throw std::invalid_argument("generate_scenario: usage_profile needs 24 values");
  for (double p : usage_profile)
    if (p < 0.0 || p >= 1.0)
      throw std::invalid_argument("generate_scenario: usage probabilities must lie in [0,1)");

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  Scenario sc;
  sc.timeline.dt_h = dt_h;
  sc.timeline.T = T;
  const int n_v = n_stations * vehicles_per_station;
  sc.timeline.l.setOnes(T, n_v);

  // Three vehicle archetypes cycled through the fleet.
  struct Archetype {
    double cap, umax, cons;
  };
  const std::array<Archetype, 3> types = {{{36.0, 11.0, 0.16}, {52.0, 22.0, 0.19}, {28.0, 7.4, 0.14}}};

  for (int s = 0; s < n_stations; ++s) {
    StationSpec st;
    st.id = s;
    st.n_max_chargers = vehicles_per_station;
    st.base_load_kw = diurnal_base_load(vehicles_per_station, T, dt_h);
    st.pv_kw.assign(T, 0.0);
    st.buy_price = tariff_preset(s % 2, T, dt_h, false);
    st.sell_price = tariff_preset(s % 2, T, dt_h, true);
    double cap_sum = 0.0;
    for (int k = 0; k < vehicles_per_station; ++k) cap_sum += types[(s * vehicles_per_station + k) % 3].umax;
    st.p_max_kw = std::max(11.0, 0.75 * (cap_sum + vehicles_per_station * 1.6));
    sc.stations.push_back(std::move(st));
  }

  // Mean reserved duration ~2.2 h drives the departure hazard so that the
  // stationary absent fraction matches the hourly usage probability.
  const double mean_duration_h = 2.2;
  const double mean_duration_steps = mean_duration_h / dt_h;

  std::vector<Eigen::Triplet<double>> e_trip, de_trip;
  for (int v = 0; v < n_v; ++v) {
    const auto& at = types[v % 3];
    VehicleSpec ev;
    ev.id = "ev" + std::to_string(v);
    ev.capacity_kwh = at.cap;
    ev.min_soc_kwh = 0.1 * at.cap;
    ev.max_charge_kw = at.umax;
    ev.max_discharge_kw = at.umax;
    ev.eta_ch = 0.95;
    ev.eta_ds = 0.95;
    ev.tau_sd_h = 1000.0;
    ev.consumption_kwh_per_km = at.cons;
    ev.home_station_id = v / vehicles_per_station;
    ev.initial_soc_kwh = (0.4 + 0.5 * u01(rng)) * at.cap;
    sc.fleet.push_back(ev);

    const double range_km = at.cap / at.cons;
    int t = 0;
    while (t < T) {
      const int hour = static_cast<int>(std::floor(t * dt_h)) % 24;
      const double p = usage_profile[hour];
      const double hazard = p >= 1.0 ? 1.0 : std::min(1.0, p / ((1.0 - p) * mean_duration_steps));
      if (u01(rng) >= hazard) {
        ++t;
        continue;
      }
      // Trip departs after step t-1; duration and distance are heavy-tailed.
      const double dur_h = std::min(lognormal(rng, 1.6, 0.8), 24.0);
      const int dur_steps = std::max(1, static_cast<int>(std::llround(dur_h / dt_h)));
      double km = std::min(lognormal(rng, 25.0, 0.8), 0.9 * range_km);
      const double energy = km * at.cons;

      const int a = t;
      const int b = std::min(t + dur_steps, T);
      for (int s = a; s < b; ++s) sc.timeline.l(s, v) = 0;
      if (a >= 1) {
        e_trip.emplace_back(a - 1, v, energy);
        if (t + dur_steps < T) de_trip.emplace_back(t + dur_steps, v, energy);
      }
      t = b + 1; // at least one present step between trips
    }
  }
  sc.timeline.e.resize(T, n_v);
  sc.timeline.e.setFromTriplets(e_trip.begin(), e_trip.end(),
                                [](double x, double y) { return std::max(x, y); });
  sc.timeline.delta_e.resize(T, n_v);
  sc.timeline.delta_e.setFromTriplets(de_trip.begin(), de_trip.end());

  sc.objectives.station.kind = ObjectiveKind::energy_cost;
  sc.objectives.system.kind = ObjectiveKind::none;
  return sc;
}

std::vector<StationSpec> assign_pv(std::vector<StationSpec> stations,
                                   double power_per_charger_kw, std::uint64_t seed,
                                   double dt_h) {
  if (power_per_charger_kw < 0.0)
    throw std::invalid_argument("assign_pv: power_per_charger_kw must be >= 0");
  if (dt_h <= 0.0) throw std::invalid_argument("assign_pv: dt_h must be positive");
  std::mt19937_64 rng(seed ^ 0xda3e39cb94b95bdbULL);
  const auto& curve = solar_curve_table();
  for (auto& st : stations) {
    const bool chosen = u01(rng) < 0.5;
    if (!chosen) continue;
    const double nominal = power_per_charger_kw * st.n_max_chargers;
    const int T = static_cast<int>(st.base_load_kw.size());
    st.pv_kw.resize(T);
    for (int t = 0; t < T; ++t) {
      const int h = static_cast<int>(std::floor(t * dt_h)) % 24;
      st.pv_kw[t] = nominal * curve[h];
    }
  }
  return stations;
}

} // namespace v2g
