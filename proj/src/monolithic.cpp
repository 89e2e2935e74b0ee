#include "v2gflex/monolithic.hpp"

#include <cmath>
#include <stdexcept>

#include "v2gflex/branch_bound.hpp"
#include "v2gflex/qp_solver.hpp"

namespace v2g {

const char* to_string(BilinearMode m) {
  switch (m) {
    case BilinearMode::integer_vars: return "integer";
    case BilinearMode::taylor: return "taylor";
    case BilinearMode::wang: return "wang";
    case BilinearMode::none: return "none";
  }
  return "none";
}

BilinearMode bilinear_mode_from_string(const std::string& s) {
  for (auto m : {BilinearMode::integer_vars, BilinearMode::taylor, BilinearMode::wang,
                 BilinearMode::none})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown bilinear mode: " + s);
}

void FormulationOptions::validate() const {
  if (stations_not_downsized && !strictly_stationary)
    throw std::invalid_argument(
        "FormulationOptions: stations_not_downsized requires strictly_stationary");
  if (!bidirectional &&
      (bilinear_mode == BilinearMode::taylor || bilinear_mode == BilinearMode::wang))
    throw std::invalid_argument(
        "FormulationOptions: bilinear relaxations require a bidirectional fleet");
}

AssembledProblem assemble(const Scenario& sc, const FormulationOptions& opts,
                          std::vector<std::string>* warnings) {
  opts.validate();
  sc.validate();
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };

  const auto& tl = sc.timeline;
  const int T = tl.T;
  const int n_v = sc.n_vehicles();
  const int n_s = sc.n_stations();
  const bool bidir = opts.bidirectional;
  const bool with_xc = bidir && opts.bilinear_mode == BilinearMode::integer_vars;
  const bool with_c = !opts.stations_not_downsized;

  AssembledProblem ap;
  ap.dt_h = tl.dt_h;
  auto& L = ap.layout;
  L.T = T;
  L.n_v = n_v;
  L.n_s = n_s;
  L.bidirectional = bidir;

  for (const auto& v : sc.fleet) ap.dynamics.push_back(discretize(v, tl.dt_h));
  for (int s = 0; s < n_s; ++s) ap.station_vehicles.push_back(sc.vehicles_at(sc.stations[s].id));

  QpBuilder b;

  // Vehicle blocks: controls bounded by presence (Eq. 12 shape); with charger
  // binaries the gating moves into coupling rows, so the static bound is the
  // device limit.
  for (int v = 0; v < n_v; ++v) {
    const auto& ev = sc.fleet[v];
    L.vehicle_base.push_back(b.n_vars());
    for (int t = 0; t < T; ++t) {
      const double cap = tl.present(t, v) ? ev.max_charge_kw : 0.0;
      b.add_var("uc[" + std::to_string(v) + "," + std::to_string(t) + "]", 0.0, cap);
    }
    if (bidir) {
      for (int t = 0; t < T; ++t) {
        const double cap = tl.present(t, v) ? ev.max_discharge_kw : 0.0;
        b.add_var("ud[" + std::to_string(v) + "," + std::to_string(t) + "]", 0.0, cap);
      }
    }
    const double floor = ev.soc_floor();
    for (int k = 0; k <= T; ++k) {
      if (k == 0)
        b.add_var("x[" + std::to_string(v) + ",0]", ev.initial_soc_kwh, ev.initial_soc_kwh);
      else
        b.add_var("x[" + std::to_string(v) + "," + std::to_string(k) + "]", floor,
                  ev.capacity_kwh);
    }
  }

  for (int s = 0; s < n_s; ++s) {
    const auto& st = sc.stations[s];
    L.station_p_base.push_back(
        b.add_vars("p_s" + std::to_string(st.id), T, st.power_lower(), st.p_max_kw));
  }

  if (!sc.objectives.system.is_none())
    L.aggregate_base = b.add_vars("g", T, -kInf, kInf);

  // Dynamics equalities (state update with trip losses).
  for (int v = 0; v < n_v; ++v) {
    const auto& dyn = ap.dynamics[v];
    for (int t = 0; t < T; ++t) {
      const double de = tl.delta_e.coeff(t, v);
      std::vector<std::pair<int, double>> row = {{L.x(v, t + 1), 1.0},
                                                 {L.x(v, t), -dyn.a},
                                                 {L.uc(v, t), -dyn.b_ch}};
      if (bidir) row.push_back({L.ud(v, t), dyn.b_ds});
      b.add_row(-de, row, -de);
    }
  }

  // Station power definition. Under strict stationarity every assigned EV
  // contributes; otherwise only EVs present at the station couple in.
  for (int s = 0; s < n_s; ++s) {
    const auto& st = sc.stations[s];
    for (int t = 0; t < T; ++t) {
      std::vector<std::pair<int, double>> row = {{L.ps(s, t), 1.0}};
      for (int v : ap.station_vehicles[s]) {
        if (!opts.strictly_stationary && !tl.present(t, v)) continue;
        row.push_back({L.uc(v, t), -1.0});
        if (bidir) row.push_back({L.ud(v, t), 1.0});
      }
      const double rhs = st.base_load_kw[t] - st.pv_kw[t];
      b.add_row(rhs, row, rhs);
    }
  }

  if (L.aggregate_base >= 0) {
    for (int t = 0; t < T; ++t) {
      std::vector<std::pair<int, double>> row = {{L.g(t), 1.0}};
      for (int s = 0; s < n_s; ++s) row.push_back({L.ps(s, t), -1.0});
      b.add_row(0.0, row, 0.0);
    }
  }

  // Plug-state binaries forbid simultaneous charge and discharge; big-M is
  // the device limit itself.
  if (with_xc) {
    L.xc_var.assign(n_v, std::vector<int>(T, -1));
    for (int v = 0; v < n_v; ++v) {
      const auto& ev = sc.fleet[v];
      if (ev.max_charge_kw <= 0.0 || ev.max_discharge_kw <= 0.0) continue;
      for (int t = 0; t < T; ++t) {
        if (!tl.present(t, v)) continue;
        const int xc = b.add_var("xc[" + std::to_string(v) + "," + std::to_string(t) + "]",
                                 0.0, 1.0);
        b.mark_binary(xc);
        L.xc_var[v][t] = xc;
        b.add_row(-kInf, {{L.uc(v, t), 1.0}, {xc, -ev.max_charge_kw}}, 0.0);
        b.add_row(-kInf, {{L.ud(v, t), 1.0}, {xc, ev.max_discharge_kw}}, ev.max_discharge_kw);
      }
    }
  }

  // Charger-connection binaries and per-station charger counts; a car can
  // only connect where it is present (c <= l collapses to dropping the
  // variable at absent steps).
  if (with_c) {
    L.c_var.assign(n_v, std::vector<int>(T, -1));
    for (int v = 0; v < n_v; ++v) {
      const auto& ev = sc.fleet[v];
      for (int t = 0; t < T; ++t) {
        if (!tl.present(t, v)) continue;
        const int c = b.add_var("c[" + std::to_string(v) + "," + std::to_string(t) + "]",
                                0.0, 1.0);
        b.mark_binary(c);
        L.c_var[v][t] = c;
        b.add_row(-kInf, {{L.uc(v, t), 1.0}, {c, -ev.max_charge_kw}}, 0.0);
        if (bidir)
          b.add_row(-kInf, {{L.ud(v, t), 1.0}, {c, -ev.max_discharge_kw}}, 0.0);
      }
    }
    for (int s = 0; s < n_s; ++s) {
      for (int t = 0; t < T; ++t) {
        std::vector<std::pair<int, double>> row;
        for (int v : ap.station_vehicles[s])
          if (L.c_var[v][t] >= 0) row.push_back({L.c_var[v][t], 1.0});
        if (static_cast<int>(row.size()) > sc.stations[s].n_max_chargers)
          b.add_row(-kInf, row, sc.stations[s].n_max_chargers);
      }
    }
  }

  // Objectives.
  for (int s = 0; s < n_s; ++s)
    L.station_y_base.push_back(build_station_objective(
        b, sc.objectives.station, sc.stations[s], L.station_p_base[s], T, tl.dt_h));
  if (L.aggregate_base >= 0)
    build_system_objective(b, sc.objectives.system, L.aggregate_base, T, tl.dt_h);
  build_soc_penalty(b, tl.e, [&](int k, int v) { return L.x(v, k); },
                    sc.objectives.soc_penalty_k);

  // Unreachable requirements are allowed (the soft penalty absorbs them) but
  // worth flagging.
  for (int v = 0; v < n_v; ++v) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(tl.e, v); it; ++it) {
      if (it.value() <= 0.0) continue;
      bool can_charge = false;
      for (int t = 0; t <= it.row() && !can_charge; ++t) can_charge = tl.present(t, v);
      if (!can_charge)
        warn("vehicle " + sc.fleet[v].id + " has an energy requirement at step " +
             std::to_string(it.row()) + " but no prior presence; soft penalty applies");
    }
  }

  ap.qp = b.build();
  return ap;
}

ExtractedSchedule extract_solution(const AssembledProblem& ap, const Eigen::VectorXd& sol,
                                   const Scenario& sc) {
  const auto& L = ap.layout;
  if (sol.size() != ap.qp.n) throw std::invalid_argument("extract_solution: layout mismatch");
  ExtractedSchedule out;
  FleetSchedule& fs = out.schedule;
  fs.dt_h = ap.dt_h;
  fs.u_c.setZero(L.T, L.n_v);
  fs.u_d.setZero(L.T, L.n_v);
  fs.x.setZero(L.T + 1, L.n_v);
  fs.station_power.setZero(L.T, L.n_s);

  for (int v = 0; v < L.n_v; ++v) {
    for (int t = 0; t < L.T; ++t) {
      fs.u_c(t, v) = sol[L.uc(v, t)];
      if (L.bidirectional) fs.u_d(t, v) = sol[L.ud(v, t)];
    }
    fs.x(0, v) = sc.fleet[v].initial_soc_kwh;
    for (int t = 0; t < L.T; ++t)
      fs.x(t + 1, v) = propagate(fs.x(t, v), ap.dynamics[v], fs.u_c(t, v), fs.u_d(t, v),
                                 sc.timeline.delta_e.coeff(t, v));
    for (int k = 0; k <= L.T; ++k)
      out.solver_state_drift =
          std::max(out.solver_state_drift, std::abs(sol[L.x(v, k)] - fs.x(k, v)));
  }

  for (int s = 0; s < L.n_s; ++s) {
    const auto& st = sc.stations[s];
    for (int t = 0; t < L.T; ++t) {
      double p = st.base_load_kw[t] - st.pv_kw[t];
      for (int v : ap.station_vehicles[s]) p += fs.u_c(t, v) - fs.u_d(t, v);
      fs.station_power(t, s) = p;
    }
  }

  for (int s = 0; s < L.n_s; ++s)
    fs.station_cost += eval_station_objective(sc.objectives.station, sc.stations[s],
                                              fs.station_power.col(s), ap.dt_h);
  fs.system_cost =
      eval_system_objective(sc.objectives.system, fs.fleet_power(), ap.dt_h);
  fs.soc_penalty = eval_soc_penalty(sc.timeline, fs.x, sc.objectives.soc_penalty_k);
  return out;
}

FleetSchedule lexicographic_peak_shave(const Scenario& sc, const FormulationOptions& opts,
                                       double tol, double qp_eps_abs, double qp_eps_rel) {
  Scenario stage = sc;
  stage.objectives.station.kind = ObjectiveKind::energy_cost;
  stage.objectives.system.kind = ObjectiveKind::none;

  MiqpSettings ms;
  ms.qp.eps_abs = qp_eps_abs;
  ms.qp.eps_rel = qp_eps_rel;

  AssembledProblem ap1 = assemble(stage, opts);
  QpSolution s1 = solve_miqp_bb(ap1.qp, ms);
  if (s1.status == SolveStatus::primal_infeasible)
    throw std::runtime_error("lexicographic_peak_shave: stage one infeasible");
  const double budget = extract_solution(ap1, s1.x, stage).schedule.station_cost;

  // Stage two: same feasible set plus the cost budget, flattest profile wins.
  AssembledProblem ap2 = assemble(stage, opts);
  QpProblem& qp = ap2.qp;
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < qp.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.A, k); it; ++it)
        t.emplace_back(it.row(), it.col(), it.value());
    const int r = qp.m();
    double dt = ap2.dt_h;
    for (int s = 0; s < ap2.layout.n_s; ++s) {
      const int y0 = ap2.layout.station_y_base[s];
      if (y0 < 0) continue;
      for (int k = 0; k < ap2.layout.T; ++k) t.emplace_back(r, y0 + k, dt);
    }
    Eigen::SparseMatrix<double> A2(r + 1, qp.n);
    A2.setFromTriplets(t.begin(), t.end());
    qp.A = std::move(A2);
    qp.lower.conservativeResize(r + 1);
    qp.upper.conservativeResize(r + 1);
    qp.lower[r] = -kInf;
    qp.upper[r] = budget + tol * std::abs(budget) + 1e-9;

    // Flatness objective replaces the cost objective.
    std::vector<Eigen::Triplet<double>> pt;
    for (int s2 = 0; s2 < ap2.layout.n_s; ++s2)
      for (int k = 0; k < ap2.layout.T; ++k)
        pt.emplace_back(ap2.layout.ps(s2, k), ap2.layout.ps(s2, k), 2.0);
    // Keep the SOC slack penalty from the original P.
    for (int k = 0; k < qp.P.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.P, k); it; ++it)
        pt.emplace_back(it.row(), it.col(), it.value());
    Eigen::SparseMatrix<double> P2(qp.n, qp.n);
    P2.setFromTriplets(pt.begin(), pt.end());
    qp.P = std::move(P2);
    qp.q.setZero(); // epigraph variables no longer carry cost
    qp.c0 = 0.0;
  }
  QpSolution s2 = solve_miqp_bb(qp, ms);
  if (s2.status == SolveStatus::primal_infeasible)
    throw std::runtime_error("lexicographic_peak_shave: stage two infeasible");
  return extract_solution(ap2, s2.x, stage).schedule;
}

} // namespace v2g
