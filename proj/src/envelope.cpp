#include "v2gflex/envelope.hpp"

#include <cmath>
#include <ostream>

#include "v2gflex/threading.hpp"

namespace v2g {

const char* to_string(FlexDirection d) { return d == FlexDirection::up ? "up" : "down"; }

FlexEnvelope compute_envelope(const Scenario& sc, const std::vector<double>& prices_mwh,
                              const std::vector<int>& hours,
                              const std::vector<FlexDirection>& directions,
                              const FormulationOptions& opts, const AdmmParams& params,
                              int cell_workers) {
  Scenario base = sc;
  base.objectives.station.kind = ObjectiveKind::energy_cost;
  base.objectives.system = ObjectiveSpec{};

  FlexEnvelope env;
  env.dt_h = sc.timeline.dt_h;

  AdmmResult baseline = run_admm(base, opts, params);
  env.baseline = baseline.schedule.fleet_power();
  env.baseline_charge_cost = baseline.schedule.station_cost;
  env.baseline_soc_penalty = baseline.schedule.soc_penalty;

  // Requested deviation: total fleet power capacity, deliberately
  // unreachable, so the attained deviation traces the true boundary.
  double request_kw = 0.0;
  for (const auto& v : sc.fleet) request_kw += v.max_charge_kw + v.max_discharge_kw;
  if (request_kw <= 0.0) request_kw = 1.0;

  struct Job {
    int hour;
    double price;
    FlexDirection dir;
  };
  std::vector<Job> jobs;
  for (int hour : hours)
    for (FlexDirection dir : directions)
      for (double price : prices_mwh) jobs.push_back({hour, price, dir});

  env.cells.resize(jobs.size());
  const double dt = sc.timeline.dt_h;

  parallel_for(static_cast<int>(jobs.size()), cell_workers, [&](int i) {
    const Job& job = jobs[i];
    FlexCell cell;
    cell.hour = job.hour;
    cell.price_mwh = job.price;
    cell.direction = job.dir;

    const std::vector<int> steps = hour_to_steps(job.hour, dt, sc.timeline.T);
    if (job.price == 0.0 || steps.empty()) {
      // No incentive: the cell is the baseline by construction.
      cell.deviation_mw = 0.0;
      cell.charge_cost = env.baseline_charge_cost;
      cell.soc_penalty = env.baseline_soc_penalty;
      cell.track_revenue = 0.0;
      cell.total_cost = cell.charge_cost + cell.soc_penalty;
      cell.status = SolveStatus::optimal;
      env.cells[i] = cell;
      return;
    }

    Scenario flex = base;
    flex.objectives.system.kind = ObjectiveKind::flex_linear;
    flex.objectives.system.flex_price_mwh = job.price;
    flex.objectives.system.flex_steps = steps;
    flex.objectives.system.reference.assign(env.baseline.data(),
                                            env.baseline.data() + env.baseline.size());
    const double sgn = job.dir == FlexDirection::up ? 1.0 : -1.0;
    for (int t : steps) flex.objectives.system.reference[t] += sgn * request_kw;

    try {
      AdmmResult r = run_admm(flex, opts, params);
      const Eigen::VectorXd power = r.schedule.fleet_power();
      double dev_max = 0.0, dev_energy = 0.0;
      for (int t : steps) {
        const double dev = sgn * (power[t] - env.baseline[t]);
        dev_max = std::max(dev_max, dev);
        dev_energy += dev * dt; // kWh, sign carried
      }
      cell.deviation_mw = dev_max / 1000.0;
      cell.charge_cost = r.schedule.station_cost;
      cell.soc_penalty = r.schedule.soc_penalty;
      cell.track_revenue = job.price * dev_energy / 1000.0;
      // Full objective minus the constant part of the flexibility term:
      // S = p_f*dt/1000 * sum |r - P| = const - revenue, so this equals
      // charge + penalty - revenue when the evaluators agree.
      const double s_const =
          job.price * dt / 1000.0 * request_kw * static_cast<double>(steps.size());
      cell.total_cost = r.schedule.station_cost + r.schedule.system_cost +
                        r.schedule.soc_penalty - s_const;
      cell.status = r.run.status;
      cell.iterations = r.run.iterations;
    } catch (const std::exception&) {
      cell.status = SolveStatus::primal_infeasible;
    }
    env.cells[i] = cell;
  });

  return env;
}

void FlexEnvelope::to_csv(std::ostream& os) const {
  os << "hour,price,direction,deviation_mw,charge_cost,soc_penalty,track_revenue,"
        "total_cost,status\n";
  for (const auto& c : cells)
    os << c.hour << "," << c.price_mwh << "," << to_string(c.direction) << ","
       << c.deviation_mw << "," << c.charge_cost << "," << c.soc_penalty << ","
       << c.track_revenue << "," << c.total_cost << "," << to_string(c.status) << "\n";
}

} // namespace v2g
