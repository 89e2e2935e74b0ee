#include "v2gflex/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <ostream>

#include "v2gflex/branch_bound.hpp"
#include "v2gflex/scenario.hpp"

namespace v2g {

const char* to_string(BenchMode m) {
  switch (m) {
    case BenchMode::monolithic_integer: return "monolithic-integer";
    case BenchMode::admm_integer: return "admm-integer";
    case BenchMode::admm_taylor: return "admm-taylor";
    case BenchMode::admm_wang: return "admm-wang";
  }
  return "?";
}

BenchMode bench_mode_from_string(const std::string& s) {
  for (auto m : {BenchMode::monolithic_integer, BenchMode::admm_integer,
                 BenchMode::admm_taylor, BenchMode::admm_wang})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown benchmark mode: " + s);
}

namespace {

struct ModeRun {
  double time_s = 0.0;
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
};

ModeRun run_mode(const Scenario& sc, BenchMode mode, const AdmmParams& params,
                 const BenchConfig& cfg) {
  using clk = std::chrono::steady_clock;
  ModeRun out;
  const auto t0 = clk::now();
  if (mode == BenchMode::monolithic_integer) {
    FormulationOptions opts;
    opts.bilinear_mode = BilinearMode::integer_vars;
    AssembledProblem ap = assemble(sc, opts);
    if (static_cast<int>(ap.qp.binary_vars.size()) > cfg.max_integer_binaries) {
      out.status = SolveStatus::max_iter;
      return out;
    }
    MiqpSettings ms;
    ms.warn_large = false;
    ms.time_limit_s = cfg.cell_timeout_s;
    QpSolution sol = solve_miqp_bb(ap.qp, ms);
    out.time_s = std::chrono::duration<double>(clk::now() - t0).count();
    out.status = sol.status;
    if (sol.x.size() == ap.qp.n)
      out.objective = extract_solution(ap, sol.x, sc).schedule.objective();
    return out;
  }
  FormulationOptions opts;
  opts.bilinear_mode = mode == BenchMode::admm_integer
                           ? BilinearMode::integer_vars
                           : (mode == BenchMode::admm_taylor ? BilinearMode::taylor
                                                             : BilinearMode::wang);
  AdmmResult r = run_admm(sc, opts, params);
  out.time_s = std::chrono::duration<double>(clk::now() - t0).count();
  out.status = r.run.status;
  out.objective = r.schedule.objective();
  return out;
}

} // namespace

BenchmarkGrid run_benchmark(const BenchConfig& cfg, const AdmmParams& params) {
  BenchmarkGrid grid;
  for (int n_ev : cfg.ev_counts) {
    for (int horizon : cfg.horizons) {
      const int n_stations =
          std::max(1, (n_ev + cfg.vehicles_per_station - 1) / cfg.vehicles_per_station);
      const int per_station = std::max(1, n_ev / n_stations);
      Scenario sc = generate_scenario(n_stations, per_station, horizon, cfg.dt_h,
                                      cfg.seed + n_ev * 131 + horizon,
                                      carsharing_usage_profile());
      sc.objectives.station.kind = ObjectiveKind::energy_cost;
      sc.objectives.system.kind = ObjectiveKind::track_profile;
      sc.objectives.system.reference.assign(horizon, 0.0);

      double integer_obj = std::numeric_limits<double>::quiet_NaN();
      for (BenchMode mode : cfg.modes) {
        BenchCell cell;
        cell.n_ev = n_stations * per_station;
        cell.horizon = horizon;
        cell.mode = mode;
        std::vector<double> times;
        ModeRun last;
        for (int rep = 0; rep < std::max(1, cfg.repetitions); ++rep) {
          last = run_mode(sc, mode, params, cfg);
          times.push_back(last.time_s);
          if (last.time_s > cfg.cell_timeout_s) break;
        }
        std::sort(times.begin(), times.end());
        cell.median_time_s = times[times.size() / 2];
        cell.objective = last.objective;
        cell.status = last.status;
        if (mode == BenchMode::admm_integer ||
            (mode == BenchMode::monolithic_integer && std::isnan(integer_obj)))
          integer_obj = last.objective;
        if (!std::isnan(integer_obj) && integer_obj != 0.0)
          cell.gap_vs_integer = std::abs(last.objective - integer_obj) / std::abs(integer_obj);
        grid.cells.push_back(cell);
      }
    }
  }
  return grid;
}

void BenchmarkGrid::to_csv(std::ostream& os) const {
  os << "n_ev,horizon,mode,median_time_s,objective,gap_vs_integer,status\n";
  for (const auto& c : cells)
    os << c.n_ev << "," << c.horizon << "," << to_string(c.mode) << "," << c.median_time_s
       << "," << c.objective << "," << c.gap_vs_integer << "," << to_string(c.status)
       << "\n";
}

std::string BenchmarkGrid::to_json(int indent) const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells)
    j.push_back({{"n_ev", c.n_ev},
                 {"horizon", c.horizon},
                 {"mode", to_string(c.mode)},
                 {"median_time_s", c.median_time_s},
                 {"objective", c.objective},
                 {"gap_vs_integer", c.gap_vs_integer},
                 {"status", to_string(c.status)}});
  return indent >= 0 ? j.dump(indent) : j.dump();
}

const BenchCell* BenchmarkGrid::find(int n_ev, int horizon, BenchMode mode) const {
  for (const auto& c : cells)
    if (c.horizon == horizon && c.mode == mode &&
        std::abs(c.n_ev - n_ev) <= std::max(4, n_ev / 10))
      return &c;
  return nullptr;
}

} // namespace v2g
