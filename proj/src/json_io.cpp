#include "v2gflex/json_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace v2g {

using nlohmann::json;

namespace {

json series(const std::vector<double>& v) { return json(v); }

std::vector<double> to_series(const json& j, int T, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != T)
    throw std::invalid_argument(std::string("scenario json: bad series ") + name);
  return j.get<std::vector<double>>();
}

json objective_to_json(const ObjectiveSpec& o) {
  json j;
  j["kind"] = to_string(o.kind);
  if (!o.reference.empty()) j["reference"] = o.reference;
  if (!o.discount.empty()) j["discount"] = o.discount;
  if (o.flex_price_mwh != 0.0) j["flex_price_mwh"] = o.flex_price_mwh;
  if (!o.flex_steps.empty()) j["flex_steps"] = o.flex_steps;
  if (!o.buy_price.empty()) j["buy_price"] = o.buy_price;
  if (!o.sell_price.empty()) j["sell_price"] = o.sell_price;
  return j;
}

ObjectiveSpec objective_from_json(const json& j) {
  ObjectiveSpec o;
  if (j.is_null()) return o;
  o.kind = objective_kind_from_string(j.value("kind", "none"));
  if (j.contains("reference")) o.reference = j["reference"].get<std::vector<double>>();
  if (j.contains("discount")) o.discount = j["discount"].get<std::vector<double>>();
  o.flex_price_mwh = j.value("flex_price_mwh", 0.0);
  if (j.contains("flex_steps")) o.flex_steps = j["flex_steps"].get<std::vector<int>>();
  if (j.contains("buy_price")) o.buy_price = j["buy_price"].get<std::vector<double>>();
  if (j.contains("sell_price")) o.sell_price = j["sell_price"].get<std::vector<double>>();
  return o;
}

json sparse_to_json(const Eigen::SparseMatrix<double>& m) {
  json out = json::array();
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      out.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()});
  return out;
}

Eigen::SparseMatrix<double> sparse_from_json(const json& j, int rows, int cols) {
  std::vector<Eigen::Triplet<double>> t;
  for (const auto& e : j) t.emplace_back(e[0].get<int>(), e[1].get<int>(), e[2].get<double>());
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

} // namespace

std::string scenario_to_json(const Scenario& sc, int indent) {
  json j;
  j["dt_h"] = sc.timeline.dt_h;
  j["T"] = sc.timeline.T;
  j["fleet"] = json::array();
  for (const auto& v : sc.fleet) {
    json jv;
    jv["id"] = v.id;
    jv["capacity_kwh"] = v.capacity_kwh;
    jv["min_soc_kwh"] = v.min_soc_kwh;
    jv["initial_soc_kwh"] = v.initial_soc_kwh;
    jv["max_charge_kw"] = v.max_charge_kw;
    jv["max_discharge_kw"] = v.max_discharge_kw;
    jv["eta_ch"] = v.eta_ch;
    jv["eta_ds"] = v.eta_ds;
    if (std::isfinite(v.tau_sd_h)) jv["tau_sd_h"] = v.tau_sd_h;
    jv["consumption_kwh_per_km"] = v.consumption_kwh_per_km;
    jv["home_station_id"] = v.home_station_id;
    if (v.soc_floor_kwh >= 0.0) jv["soc_floor_kwh"] = v.soc_floor_kwh;
    j["fleet"].push_back(std::move(jv));
  }
  j["stations"] = json::array();
  for (const auto& s : sc.stations) {
    json js;
    js["id"] = s.id;
    js["n_max_chargers"] = s.n_max_chargers;
    js["p_max_kw"] = s.p_max_kw;
    if (!std::isnan(s.p_min_kw)) js["p_min_kw"] = s.p_min_kw;
    js["base_load_kw"] = series(s.base_load_kw);
    js["pv_kw"] = series(s.pv_kw);
    js["buy_price"] = series(s.buy_price);
    js["sell_price"] = series(s.sell_price);
    j["stations"].push_back(std::move(js));
  }
  {
    json tl;
    json l = json::array();
    for (int t = 0; t < sc.timeline.T; ++t) {
      json row = json::array();
      for (int v = 0; v < sc.timeline.n_vehicles(); ++v)
        row.push_back(static_cast<int>(sc.timeline.l(t, v)));
      l.push_back(std::move(row));
    }
    tl["l"] = std::move(l);
    tl["e"] = sparse_to_json(sc.timeline.e);
    tl["delta_e"] = sparse_to_json(sc.timeline.delta_e);
    j["timeline"] = std::move(tl);
  }
  {
    json jo;
    jo["station"] = objective_to_json(sc.objectives.station);
    jo["system"] = objective_to_json(sc.objectives.system);
    jo["soc_penalty_k"] = sc.objectives.soc_penalty_k;
    j["objectives"] = std::move(jo);
  }
  return indent >= 0 ? j.dump(indent) : j.dump();
}

Scenario scenario_from_json(const std::string& text) {
  json j = json::parse(text);
  Scenario sc;
  sc.timeline.dt_h = j.at("dt_h").get<double>();
  sc.timeline.T = j.at("T").get<int>();
  const int T = sc.timeline.T;

  for (const auto& jv : j.at("fleet")) {
    VehicleSpec v;
    v.id = jv.at("id").get<std::string>();
    v.capacity_kwh = jv.at("capacity_kwh").get<double>();
    v.min_soc_kwh = jv.at("min_soc_kwh").get<double>();
    v.initial_soc_kwh = jv.at("initial_soc_kwh").get<double>();
    v.max_charge_kw = jv.at("max_charge_kw").get<double>();
    v.max_discharge_kw = jv.at("max_discharge_kw").get<double>();
    v.eta_ch = jv.at("eta_ch").get<double>();
    v.eta_ds = jv.at("eta_ds").get<double>();
    v.tau_sd_h = jv.value("tau_sd_h", kInf);
    v.consumption_kwh_per_km = jv.at("consumption_kwh_per_km").get<double>();
    v.home_station_id = jv.at("home_station_id").get<int>();
    v.soc_floor_kwh = jv.value("soc_floor_kwh", -1.0);
    sc.fleet.push_back(std::move(v));
  }
  for (const auto& js : j.at("stations")) {
    StationSpec s;
    s.id = js.at("id").get<int>();
    s.n_max_chargers = js.at("n_max_chargers").get<int>();
    s.p_max_kw = js.at("p_max_kw").get<double>();
    if (js.contains("p_min_kw")) s.p_min_kw = js["p_min_kw"].get<double>();
    s.base_load_kw = to_series(js.at("base_load_kw"), T, "base_load_kw");
    s.pv_kw = to_series(js.at("pv_kw"), T, "pv_kw");
    s.buy_price = to_series(js.at("buy_price"), T, "buy_price");
    s.sell_price = to_series(js.at("sell_price"), T, "sell_price");
    sc.stations.push_back(std::move(s));
  }
  const int n_v = static_cast<int>(sc.fleet.size());
  const auto& tl = j.at("timeline");
  sc.timeline.l.resize(T, n_v);
  {
    const auto& l = tl.at("l");
    if (static_cast<int>(l.size()) != T)
      throw std::invalid_argument("scenario json: l row count != T");
    for (int t = 0; t < T; ++t)
      for (int v = 0; v < n_v; ++v)
        sc.timeline.l(t, v) = static_cast<int8_t>(l[t][v].get<int>());
  }
  sc.timeline.e = sparse_from_json(tl.at("e"), T, n_v);
  sc.timeline.delta_e = sparse_from_json(tl.at("delta_e"), T, n_v);

  if (j.contains("objectives")) {
    const auto& jo = j["objectives"];
    sc.objectives.station = objective_from_json(jo.value("station", json()));
    sc.objectives.system = objective_from_json(jo.value("system", json()));
    sc.objectives.soc_penalty_k = jo.value("soc_penalty_k", 1e4);
  }
  return sc;
}

void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << scenario_to_json(sc) << "\n";
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return scenario_from_json(ss.str());
}

std::int64_t parse_iso8601(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  const int got = std::sscanf(s.c_str(), "%d-%d-%d%*1[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
  if (got < 5) throw std::invalid_argument("bad ISO-8601 timestamp: " + s);
  // Days from civil date (Howard Hinnant's algorithm), UTC.
  const int yy = y - (mo <= 2);
  const int era = (yy >= 0 ? yy : yy - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(yy - era * 400);
  const unsigned doy = (153u * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  const std::int64_t days = era * 146097LL + static_cast<std::int64_t>(doe) - 719468LL;
  return days * 86400 + h * 3600 + mi * 60 + sec;
}

std::vector<BookingRecord> read_booking_csv(std::istream& in) {
  std::vector<BookingRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (line.find("vehicle_id") == std::string::npos)
    throw std::invalid_argument("booking csv: missing header");
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    f.push_back(cur);
    if (f.size() != 7)
      throw std::invalid_argument("booking csv line " + std::to_string(lineno) +
                                  ": expected 7 fields");
    BookingRecord r;
    r.vehicle_id = f[0];
    r.reservation_start = parse_iso8601(f[1]);
    r.reservation_end = parse_iso8601(f[2]);
    r.drive_start = parse_iso8601(f[3]);
    r.drive_end = parse_iso8601(f[4]);
    r.distance_km = std::stod(f[5]);
    r.cancelled = f[6] == "1" || f[6] == "true" || f[6] == "True";
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<BookingRecord> read_booking_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_booking_csv(f);
}

void schedule_to_csv(const FleetSchedule& sched, const std::vector<VehicleSpec>& fleet,
                     std::ostream& os) {
  os << "time,vehicle,u_c,u_d,soc\n";
  for (int t = 0; t < sched.T(); ++t)
    for (int v = 0; v < sched.n_vehicles(); ++v)
      os << t * sched.dt_h << "," << (v < static_cast<int>(fleet.size()) ? fleet[v].id : std::to_string(v))
         << "," << sched.u_c(t, v) << "," << sched.u_d(t, v) << "," << sched.x(t + 1, v)
         << "\n";
}

std::string schedule_to_json(const FleetSchedule& sched, int indent) {
  json j;
  j["dt_h"] = sched.dt_h;
  j["T"] = sched.T();
  j["n_vehicles"] = sched.n_vehicles();
  j["n_stations"] = sched.n_stations();
  j["station_cost"] = sched.station_cost;
  j["system_cost"] = sched.system_cost;
  j["soc_penalty"] = sched.soc_penalty;
  j["objective"] = sched.objective();
  json sp = json::array();
  for (int s = 0; s < sched.n_stations(); ++s) {
    json col = json::array();
    for (int t = 0; t < sched.T(); ++t) col.push_back(sched.station_power(t, s));
    sp.push_back(std::move(col));
  }
  j["station_power"] = std::move(sp);
  return indent >= 0 ? j.dump(indent) : j.dump();
}

} // namespace v2g
