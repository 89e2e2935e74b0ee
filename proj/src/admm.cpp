#include "v2gflex/admm.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "v2gflex/branch_bound.hpp"
#include "v2gflex/qp_solver.hpp"
#include "v2gflex/threading.hpp"

namespace v2g {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(const clock_t_::time_point& t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

Scenario slice_station(const Scenario& sc, int si, std::vector<int>& vehicle_ids) {
  Scenario local;
  local.stations = {sc.stations[si]};
  vehicle_ids = sc.vehicles_at(sc.stations[si].id);
  const int T = sc.timeline.T;
  const int n = static_cast<int>(vehicle_ids.size());
  local.timeline.dt_h = sc.timeline.dt_h;
  local.timeline.T = T;
  local.timeline.l.resize(T, n);
  std::vector<Eigen::Triplet<double>> e_t, de_t;
  for (int j = 0; j < n; ++j) {
    const int v = vehicle_ids[j];
    local.fleet.push_back(sc.fleet[v]);
    for (int t = 0; t < T; ++t) local.timeline.l(t, j) = sc.timeline.l(t, v);
    for (Eigen::SparseMatrix<double>::InnerIterator it(sc.timeline.e, v); it; ++it)
      e_t.emplace_back(it.row(), j, it.value());
    for (Eigen::SparseMatrix<double>::InnerIterator it(sc.timeline.delta_e, v); it; ++it)
      de_t.emplace_back(it.row(), j, it.value());
  }
  local.timeline.e.resize(T, n);
  local.timeline.e.setFromTriplets(e_t.begin(), e_t.end());
  local.timeline.delta_e.resize(T, n);
  local.timeline.delta_e.setFromTriplets(de_t.begin(), de_t.end());
  local.objectives.station = sc.objectives.station;
  local.objectives.system = ObjectiveSpec{};
  local.objectives.soc_penalty_k = sc.objectives.soc_penalty_k;
  return local;
}

} // namespace

struct StationSubproblem::Impl {
  Scenario local;
  std::vector<int> vehicle_ids;
  FormulationOptions opts;
  AdmmParams params;
  double scale = 1.0;
  double rho_phys = 0.0, gamma_phys = 0.0;
  int T = 0, n_vl = 0;

  AssembledProblem ap;
  std::vector<Eigen::Triplet<double>> p_base; // P incl. constant penalty pattern
  Eigen::VectorXd q_base;
  std::unique_ptr<SplittingQpSolver> solver;
  Eigen::VectorXd base_l, base_u;
  std::vector<int> bb_rows, bb_vars;

  Eigen::VectorXd last_x, last_y;
  bool have_warm = false;

  Eigen::MatrixXd u_c, u_d;           // current iterate, T x n_vl
  Eigen::MatrixXd u_prev_c, u_prev_d; // damping reference
  Eigen::VectorXd q_iter;             // per-iteration linear cost
  RelaxationState relax;
  bool use_relax = false;

  int pair_count() const { return n_vl * T; }
  int uc_var(int pair) const { return ap.layout.uc(pair / T, pair % T); }
  int ud_var(int pair) const { return ap.layout.ud(pair / T, pair % T); }

  Eigen::VectorXd power_from_controls() const {
    const auto& st = local.stations[0];
    Eigen::VectorXd p(T);
    for (int t = 0; t < T; ++t) {
      double acc = st.base_load_kw[t] - st.pv_kw[t];
      for (int j = 0; j < n_vl; ++j) acc += u_c(t, j) - u_d(t, j);
      p[t] = acc;
    }
    return p;
  }

  Eigen::MatrixXd soc_from_controls() const {
    Eigen::MatrixXd x(T + 1, n_vl);
    for (int j = 0; j < n_vl; ++j) {
      x(0, j) = local.fleet[j].initial_soc_kwh;
      for (int t = 0; t < T; ++t)
        x(t + 1, j) = propagate(x(t, j), ap.dynamics[j], u_c(t, j), u_d(t, j),
                                local.timeline.delta_e.coeff(t, j));
    }
    return x;
  }

  void set_controls_from_vec(const Eigen::VectorXd& x) {
    for (int j = 0; j < n_vl; ++j)
      for (int t = 0; t < T; ++t) {
        u_c(t, j) = std::max(x[ap.layout.uc(j, t)], 0.0);
        u_d(t, j) = opts.bidirectional ? std::max(x[ap.layout.ud(j, t)], 0.0) : 0.0;
      }
  }

  void set_controls_from_relax() {
    for (int p = 0; p < pair_count(); ++p) {
      u_c(p % T, p / T) = scale * relax.z_cur[p];
      u_d(p % T, p / T) = scale * relax.z_cur[pair_count() + p];
    }
  }

  Eigen::SparseMatrix<double> build_P(const std::vector<Eigen::Triplet<double>>* extra) const {
    std::vector<Eigen::Triplet<double>> t = p_base;
    for (int tt = 0; tt < T; ++tt)
      t.emplace_back(ap.layout.ps(0, tt), ap.layout.ps(0, tt), rho_phys);
    if (extra) t.insert(t.end(), extra->begin(), extra->end());
    Eigen::SparseMatrix<double> P(ap.qp.n, ap.qp.n);
    P.setFromTriplets(t.begin(), t.end());
    return P;
  }

  QpSolution solve_cost(const Eigen::VectorXd& q) {
    solver->update_lin_cost(q);
    if (have_warm)
      solver->warm_start(last_x, last_y);
    else
      solver->cold_start();
    QpSolution s = solver->solve();
    if (s.status == SolveStatus::optimal || s.status == SolveStatus::max_iter) {
      last_x = s.x;
      last_y = s.y;
      have_warm = true;
    }
    return s;
  }

  QpSolution solve_integer() {
    solver->update_lin_cost(q_iter);
    MiqpSettings ms;
    ms.tol = params.bb_tol;
    ms.node_limit = params.bb_node_limit;
    ms.warn_large = false;
    ms.qp.eps_abs = params.qp_eps_abs;
    ms.qp.eps_rel = params.qp_eps_rel;
    ms.qp.max_iter = params.qp_max_iter;
    QpSolution s = branch_and_bound_on(*solver, base_l, base_u, bb_rows, bb_vars,
                                       ap.qp.n, ms, have_warm ? &last_x : nullptr,
                                       have_warm ? &last_y : nullptr);
    if (s.x.size() == ap.qp.n) {
      last_x = s.x;
      last_y = s.y;
      have_warm = true;
    }
    return s;
  }
};

StationSubproblem::StationSubproblem(const Scenario& sc, int station_index,
                                     const FormulationOptions& opts, const AdmmParams& params,
                                     double power_scale)
    : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.opts = opts;
  im.params = params;
  im.scale = power_scale;
  im.local = slice_station(sc, station_index, im.vehicle_ids);
  im.T = sc.timeline.T;
  im.n_vl = static_cast<int>(im.vehicle_ids.size());
  im.rho_phys = params.rho / (power_scale * power_scale);
  im.gamma_phys = params.gamma / (power_scale * power_scale);

  im.ap = assemble(im.local, opts);

  // Constant penalty pattern on top of the assembled quadratic cost: the
  // sharing coupling on the power block, damping on the controls, and the
  // relaxation's own quadratic where its Hessian is constant. The pairwise
  // (derived Taylor) entries are seeded with zeros so the KKT pattern never
  // changes between iterations.
  const auto& L = im.ap.layout;
  for (int k = 0; k < im.ap.qp.P.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(im.ap.qp.P, k); it; ++it)
      im.p_base.emplace_back(it.row(), it.col(), it.value());

  im.use_relax = opts.bilinear_mode == BilinearMode::taylor ||
                 opts.bilinear_mode == BilinearMode::wang;
  const double rho_b_phys = params.rho_b / (power_scale * power_scale);
  const bool diag_relax =
      im.use_relax && (opts.bilinear_mode == BilinearMode::wang ||
                       params.taylor_form == TaylorForm::printed);
  const bool pair_relax = im.use_relax && opts.bilinear_mode == BilinearMode::taylor &&
                          params.taylor_form == TaylorForm::derived;
  if (im.n_vl > 0 && im.T > 0) {
    for (int p = 0; p < im.pair_count(); ++p) {
      const int uc = im.uc_var(p);
      im.p_base.emplace_back(uc, uc, im.gamma_phys + (diag_relax ? rho_b_phys : 0.0));
      if (opts.bidirectional) {
        const int ud = im.ud_var(p);
        im.p_base.emplace_back(ud, ud, im.gamma_phys + (diag_relax ? rho_b_phys : 0.0));
        if (pair_relax) {
          im.p_base.emplace_back(uc, uc, 0.0);
          im.p_base.emplace_back(ud, ud, 0.0);
          im.p_base.emplace_back(uc, ud, 0.0);
          im.p_base.emplace_back(ud, uc, 0.0);
        }
      }
    }
  }

  QpProblem solver_problem = im.ap.qp;
  solver_problem.P = im.build_P(nullptr);
  im.q_base = im.ap.qp.q;
  im.base_l = solver_problem.lower;
  im.base_u = solver_problem.upper;
  // Identity bound rows come first in the canonical build: row id == var id.
  for (int b : solver_problem.binary_vars) {
    im.bb_rows.push_back(b);
    im.bb_vars.push_back(b);
  }

  QpSettings qs;
  qs.eps_abs = params.qp_eps_abs;
  qs.eps_rel = params.qp_eps_rel;
  qs.max_iter = params.qp_max_iter;
  im.solver = std::make_unique<SplittingQpSolver>(solver_problem, qs);

  im.u_c.setZero(im.T, im.n_vl);
  im.u_d.setZero(im.T, im.n_vl);
  im.u_prev_c = im.u_c;
  im.u_prev_d = im.u_d;

  if (im.use_relax) {
    im.relax = RelaxationState::make(opts.bilinear_mode, im.pair_count(), params.rho_b,
                                     params.gamma_b, params.alpha);
    im.relax.taylor_form = params.taylor_form;
    im.relax.wang_projects_copy = params.wang_projects_copy;
    if (params.random_init)
      im.relax.randomize(params.seed ^ (0x5851f42d4c957f2dULL + station_index));
  }
}

StationSubproblem::~StationSubproblem() = default;
StationSubproblem::StationSubproblem(StationSubproblem&&) noexcept = default;

void StationSubproblem::set_rho_phys(double rho_phys) {
  auto& im = *impl_;
  if (rho_phys == im.rho_phys) return;
  im.rho_phys = rho_phys;
  // Diagonal-only change; pairwise modes rebuild P every pass anyway.
  if (!(im.use_relax && im.opts.bilinear_mode == BilinearMode::taylor &&
        im.params.taylor_form == TaylorForm::derived))
    im.solver->update_quad_cost(im.build_P(nullptr));
}

Eigen::VectorXd StationSubproblem::passive_power() const {
  auto& im = *impl_;
  const auto& st = im.local.stations[0];
  Eigen::VectorXd p(im.T);
  for (int t = 0; t < im.T; ++t) p[t] = st.base_load_kw[t] - st.pv_kw[t];
  return p;
}

const Eigen::MatrixXd& StationSubproblem::u_c() const { return impl_->u_c; }
const Eigen::MatrixXd& StationSubproblem::u_d() const { return impl_->u_d; }
const std::vector<int>& StationSubproblem::vehicle_ids() const { return impl_->vehicle_ids; }

StationSubproblem::Result StationSubproblem::update(const Eigen::VectorXd& r_u) {
  auto& im = *impl_;
  if (r_u.size() != im.T) throw std::invalid_argument("station update: r_u length != T");
  const auto& L = im.ap.layout;

  // Per-iteration linear cost: coupling pull toward r_u and damping toward
  // the previous controls.
  im.q_iter = im.q_base;
  for (int t = 0; t < im.T; ++t) im.q_iter[L.ps(0, t)] -= im.rho_phys * r_u[t];
  for (int j = 0; j < im.n_vl; ++j)
    for (int t = 0; t < im.T; ++t) {
      im.q_iter[L.uc(j, t)] -= im.gamma_phys * im.u_prev_c(t, j);
      if (im.opts.bidirectional) im.q_iter[L.ud(j, t)] -= im.gamma_phys * im.u_prev_d(t, j);
    }

  Result res;
  int qp_iters = 0;

  if (!im.use_relax) {
    QpSolution s = im.opts.bilinear_mode == BilinearMode::integer_vars && !im.bb_vars.empty()
                       ? im.solve_integer()
                       : im.solve_cost(im.q_iter);
    qp_iters = s.iterations;
    res.status = s.status;
    if (s.x.size() == im.ap.qp.n) im.set_controls_from_vec(s.x);
    double r = 0.0;
    for (int j = 0; j < im.n_vl; ++j)
      for (int t = 0; t < im.T; ++t) r = std::max(r, im.u_c(t, j) * im.u_d(t, j));
    res.compl_residual = r;
  } else {
    // One relaxation pass per outer iteration (interleaved). The hook folds
    // the relaxation penalty into this iteration's cost; the relaxation
    // state lives in normalized power units.
    const double k_phys = im.params.rho_b / (im.scale * im.scale);
    StationSolveHook hook = [&](const RelaxPenalty& pen) -> Eigen::VectorXd {
      Eigen::VectorXd q2 = im.q_iter;
      if (pen.form == RelaxPenalty::Form::diagonal) {
        for (int p = 0; p < im.pair_count(); ++p) {
          q2[im.uc_var(p)] -= k_phys * im.scale * pen.target[p];
          q2[im.ud_var(p)] -= k_phys * im.scale * pen.target[im.pair_count() + p];
        }
      } else {
        // 0.5*k_phys*(pa*u_c + pb*u_d - scale*pd)^2 per pair.
        std::vector<Eigen::Triplet<double>> pt;
        for (int p = 0; p < im.pair_count(); ++p) {
          const int uc = im.uc_var(p), ud = im.ud_var(p);
          const double a = pen.pa[p], b = pen.pb[p], d = im.scale * pen.pd[p];
          pt.emplace_back(uc, uc, k_phys * a * a);
          pt.emplace_back(ud, ud, k_phys * b * b);
          pt.emplace_back(uc, ud, k_phys * a * b);
          pt.emplace_back(ud, uc, k_phys * a * b);
          q2[uc] -= k_phys * a * d;
          q2[ud] -= k_phys * b * d;
        }
        im.solver->update_quad_cost(im.build_P(&pt));
      }
      QpSolution s = im.solve_cost(q2);
      qp_iters += s.iterations;
      res.status = s.status;
      Eigen::VectorXd stacked(2 * im.pair_count());
      for (int p = 0; p < im.pair_count(); ++p) {
        stacked[p] = std::max(s.x[im.uc_var(p)], 0.0) / im.scale;
        stacked[im.pair_count() + p] = std::max(s.x[im.ud_var(p)], 0.0) / im.scale;
      }
      return stacked;
    };
    im.relax = relaxation_iterate(std::move(im.relax), hook);
    im.set_controls_from_relax();
    res.compl_residual = im.scale * im.scale * im.relax.compl_residual();
    res.copy_compl_residual = im.scale * im.scale * im.relax.copy_compl_residual();
  }

  res.power = im.power_from_controls();
  const Eigen::MatrixXd x = im.soc_from_controls();
  res.station_cost = eval_station_objective(im.local.objectives.station,
                                            im.local.stations[0], res.power, im.local.timeline.dt_h);
  res.soc_penalty = eval_soc_penalty(im.local.timeline, x, im.local.objectives.soc_penalty_k);
  res.damping_term = 0.5 * im.gamma_phys *
                     ((im.u_c - im.u_prev_c).squaredNorm() + (im.u_d - im.u_prev_d).squaredNorm());
  res.qp_iterations = qp_iters;

  im.u_prev_c = im.u_c;
  im.u_prev_d = im.u_d;
  return res;
}

Eigen::VectorXd admm_dual_update(const Eigen::VectorXd& lambda, const Eigen::VectorXd& p_bar,
                                 const Eigen::VectorXd& z) {
  return lambda + p_bar - z;
}

Eigen::VectorXd admm_z_update(const Eigen::VectorXd& p_bar, const Eigen::VectorXd& lambda,
                              double rho_phys, int n_s, const ObjectiveSpec& system,
                              double dt_h) {
  const int T = static_cast<int>(p_bar.size());
  const Eigen::VectorXd r_z = p_bar + lambda;
  switch (system.kind) {
    case ObjectiveKind::none:
      return r_z;
    case ObjectiveKind::track_profile: {
      Eigen::VectorXd z(T);
      for (int t = 0; t < T; ++t)
        z[t] = (2.0 * system.reference[t] + rho_phys * r_z[t]) / (2.0 * n_s + rho_phys);
      return z;
    }
    case ObjectiveKind::flex_linear: {
      Eigen::VectorXd z = r_z;
      if (system.flex_steps.empty() || system.flex_price_mwh == 0.0) return z;
      // T-dimensional separable QP over the called steps via the kernel.
      QpBuilder b;
      const double w = system.flex_price_mwh * dt_h / 1000.0;
      std::vector<int> zi;
      for (size_t i = 0; i < system.flex_steps.size(); ++i) {
        const int t = system.flex_steps[i];
        const int zv = b.add_var("z", -kInf, kInf);
        const int a = b.add_var("a", 0.0, kInf);
        const int d = b.add_var("d", 0.0, kInf);
        zi.push_back(zv);
        b.add_quad(zv, zv, 0.5 * n_s * rho_phys);
        b.add_lin(zv, -n_s * rho_phys * r_z[t]);
        b.add_lin(a, w);
        b.add_lin(d, w);
        b.add_row(system.reference[t], {{zv, static_cast<double>(n_s)}, {a, 1.0}, {d, -1.0}},
                  system.reference[t]);
      }
      QpSettings qs;
      qs.eps_abs = 1e-10;
      qs.eps_rel = 1e-10;
      QpSolution s = solve_qp(b.build(), qs);
      for (size_t i = 0; i < system.flex_steps.size(); ++i)
        z[system.flex_steps[i]] = s.x[zi[i]];
      return z;
    }
    case ObjectiveKind::intraday_cost: {
      QpBuilder b;
      std::vector<int> zi;
      for (int t = 0; t < T; ++t) {
        const int zv = b.add_var("z", -kInf, kInf);
        const int y = b.add_var("y", -kInf, kInf);
        zi.push_back(zv);
        b.add_quad(zv, zv, 0.5 * n_s * rho_phys);
        b.add_lin(zv, -n_s * rho_phys * r_z[t]);
        b.add_lin(y, dt_h);
        b.add_row(0.0, {{y, 1.0}, {zv, -system.buy_price[t] * n_s}}, kInf);
        b.add_row(0.0, {{y, 1.0}, {zv, -system.sell_price[t] * n_s}}, kInf);
      }
      QpSettings qs;
      qs.eps_abs = 1e-10;
      qs.eps_rel = 1e-10;
      QpSolution s = solve_qp(b.build(), qs);
      Eigen::VectorXd z(T);
      for (int t = 0; t < T; ++t) z[t] = s.x[zi[t]];
      return z;
    }
    default:
      throw std::invalid_argument("admm_z_update: unsupported system objective");
  }
}

AdmmResult run_admm(const Scenario& sc, const FormulationOptions& opts,
                    const AdmmParams& params) {
  opts.validate();
  sc.validate();
  if (!opts.strictly_stationary)
    throw std::invalid_argument(
        "run_admm: the decomposition requires a strictly stationary scenario; "
        "use the monolithic path for the general model");
  if (!opts.stations_not_downsized && opts.bilinear_mode != BilinearMode::integer_vars)
    throw std::invalid_argument(
        "run_admm: downsized stations introduce charger binaries; only the "
        "integer mode supports them");

  const auto t_start = clock_t_::now();
  const int T = sc.timeline.T;
  const int n_s = sc.n_stations();

  double scale = 0.0;
  for (const auto& v : sc.fleet) scale += v.max_charge_kw;
  scale = sc.fleet.empty() ? 1.0 : scale / sc.fleet.size();
  if (scale <= 0.0) scale = 1.0;
  double rho_norm = params.rho;
  double rho_phys = rho_norm / (scale * scale);
  int rho_adaptations = 0;
  int last_rho_change = 0;

  std::vector<StationSubproblem> stations;
  stations.reserve(n_s);
  for (int s = 0; s < n_s; ++s) stations.emplace_back(sc, s, opts, params, scale);

  std::vector<Eigen::VectorXd> p(n_s), p_prev(n_s);
  for (int s = 0; s < n_s; ++s) p[s] = stations[s].passive_power();

  auto average = [&](const std::vector<Eigen::VectorXd>& v) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(T);
    for (int s = 0; s < n_s; ++s) acc += v[s];
    return (acc / n_s).eval();
  };

  Eigen::VectorXd p_bar = average(p);
  Eigen::VectorXd z = p_bar;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(T);
  Eigen::VectorXd z_prev = z, p_bar_prev = p_bar;

  AdmmResult out;
  AdmmRun& run = out.run;
  run.params = params;
  run.power_scale = scale;
  run.message_values_per_station_per_iter = 2 * T;

  std::vector<StationSubproblem::Result> results(n_s);

  const double dim_factor = std::sqrt(static_cast<double>(n_s) * T);
  bool converged = false;

  for (int k = 1; k <= params.max_iter; ++k) {
    AdmmIterationStats st;
    const auto t_it = clock_t_::now();

    p_prev = p;
    // Station pass: each worker receives only its length-T reference series
    // and returns only its length-T power profile.
    parallel_for(n_s, params.threads, [&](int s) {
      const Eigen::VectorXd r_u = p[s] - p_bar + z - lambda;
      results[s] = stations[s].update(r_u);
    });
    st.t_station_s = seconds_since(t_it);

    const auto t_coord = clock_t_::now();
    for (int s = 0; s < n_s; ++s) p[s] = results[s].power;
    p_bar_prev = p_bar;
    p_bar = average(p);
    z_prev = z;
    z = admm_z_update(p_bar, lambda, rho_phys, n_s, sc.objectives.system, sc.timeline.dt_h);
    lambda = admm_dual_update(lambda, p_bar, z);

    // Stopping rule of the sharing problem in stacked per-station form
    // (Boyd sec. 3.3.1): r_i = p_i - z_i with z_i = p_i + z - p_bar, so
    // ||r|| = sqrt(n_s)*||p_bar - z||; s_i = rho*(z_i^k - z_i^{k-1}).
    // Norms are taken in normalized power units (divide by `scale`).
    double r_stack = std::sqrt(static_cast<double>(n_s)) * (p_bar - z).norm() / scale;
    double s_stack = 0.0, p_stack = 0.0, z_stack = 0.0;
    for (int s = 0; s < n_s; ++s) {
      const Eigen::VectorXd dzi =
          (p[s] - p_prev[s]) + (z - p_bar) - (z_prev - p_bar_prev);
      s_stack += dzi.squaredNorm();
      p_stack += p[s].squaredNorm();
      z_stack += (p[s] + z - p_bar).squaredNorm();
    }
    s_stack = rho_norm * std::sqrt(s_stack) / scale;
    const double eps_pri =
        dim_factor * params.eps_abs +
        params.eps_rel * std::max(std::sqrt(p_stack), std::sqrt(z_stack)) / scale;
    const double eps_dual = dim_factor * params.eps_abs +
                            params.eps_rel * rho_norm *
                                std::sqrt(static_cast<double>(n_s)) * lambda.norm() / scale;

    st.r_norm = r_stack;
    st.s_norm = s_stack;
    st.eps_pri = eps_pri;
    st.eps_dual = eps_dual;

    double jc = eval_system_objective(sc.objectives.system, (p_bar * n_s).eval(),
                                      sc.timeline.dt_h);
    for (int s = 0; s < n_s; ++s) {
      jc += results[s].station_cost + results[s].soc_penalty + results[s].damping_term;
      st.compl_residual = std::max(st.compl_residual, results[s].compl_residual);
      st.copy_compl_residual =
          std::max(st.copy_compl_residual, results[s].copy_compl_residual);
    }
    st.jc = jc;
    st.t_coord_s = seconds_since(t_coord);
    run.history.push_back(st);
    run.iterations = k;

    if (!params.fixed_iterations && r_stack <= eps_pri && s_stack <= eps_dual) {
      converged = true;
      break;
    }

    // Residual balancing (Boyd sec. 3.4.1): double/halve rho and rescale the
    // scaled dual so the underlying multiplier y = rho*lambda is unchanged.
    if (params.adaptive_rho && rho_adaptations < params.max_rho_adaptations &&
        k - last_rho_change >= params.rho_adapt_interval) {
      double factor = 0.0;
      if (r_stack > 10.0 * s_stack)
        factor = 2.0;
      else if (s_stack > 10.0 * r_stack)
        factor = 0.5;
      if (factor != 0.0) {
        rho_norm *= factor;
        rho_phys = rho_norm / (scale * scale);
        lambda /= factor;
        for (auto& st : stations) st.set_rho_phys(rho_phys);
        ++rho_adaptations;
        last_rho_change = k;
      }
    }
  }

  run.status = converged ? SolveStatus::optimal : SolveStatus::max_iter;
  run.z = z;
  run.lambda = lambda;
  run.final_primal_gap = p_bar - z;
  run.solve_time_s = seconds_since(t_start);

  // Assemble the fleet schedule from the station iterates.
  FleetSchedule& fs = out.schedule;
  fs.dt_h = sc.timeline.dt_h;
  const int n_v = sc.n_vehicles();
  fs.u_c.setZero(T, n_v);
  fs.u_d.setZero(T, n_v);
  fs.x.setZero(T + 1, n_v);
  fs.station_power.setZero(T, n_s);
  for (int s = 0; s < n_s; ++s) {
    const auto& ids = stations[s].vehicle_ids();
    for (size_t j = 0; j < ids.size(); ++j) {
      fs.u_c.col(ids[j]) = stations[s].u_c().col(j);
      fs.u_d.col(ids[j]) = stations[s].u_d().col(j);
    }
    fs.station_power.col(s) = p[s];
  }
  for (int v = 0; v < n_v; ++v) {
    const auto dyn = discretize(sc.fleet[v], sc.timeline.dt_h);
    fs.x(0, v) = sc.fleet[v].initial_soc_kwh;
    for (int t = 0; t < T; ++t)
      fs.x(t + 1, v) = propagate(fs.x(t, v), dyn, fs.u_c(t, v), fs.u_d(t, v),
                                 sc.timeline.delta_e.coeff(t, v));
  }
  for (int s = 0; s < n_s; ++s)
    fs.station_cost += eval_station_objective(sc.objectives.station, sc.stations[s],
                                              fs.station_power.col(s), fs.dt_h);
  fs.system_cost = eval_system_objective(sc.objectives.system, fs.fleet_power(), fs.dt_h);
  fs.soc_penalty = eval_soc_penalty(sc.timeline, fs.x, sc.objectives.soc_penalty_k);
  return out;
}

std::string AdmmRun::to_json(int indent) const {
  nlohmann::json j;
  j["params"] = {{"rho", params.rho},
                 {"gamma", params.gamma},
                 {"alpha", params.alpha},
                 {"eps_abs", params.eps_abs},
                 {"eps_rel", params.eps_rel},
                 {"max_iter", params.max_iter},
                 {"fixed_iterations", params.fixed_iterations},
                 {"rho_b", params.rho_b},
                 {"gamma_b", params.gamma_b},
                 {"taylor_form", params.taylor_form == TaylorForm::derived ? "derived" : "printed"},
                 {"threads", params.threads}};
  j["iterations"] = iterations;
  j["status"] = to_string(status);
  j["power_scale"] = power_scale;
  j["message_values_per_station_per_iter"] = message_values_per_station_per_iter;
  j["solve_time_s"] = solve_time_s;
  j["z"] = std::vector<double>(z.data(), z.data() + z.size());
  j["lambda"] = std::vector<double>(lambda.data(), lambda.data() + lambda.size());
  auto hist = nlohmann::json::array();
  for (const auto& h : history)
    hist.push_back({{"r_norm", h.r_norm},
                    {"s_norm", h.s_norm},
                    {"eps_pri", h.eps_pri},
                    {"eps_dual", h.eps_dual},
                    {"jc", h.jc},
                    {"compl_residual", h.compl_residual},
                    {"copy_compl_residual", h.copy_compl_residual},
                    {"t_station_s", h.t_station_s},
                    {"t_coord_s", h.t_coord_s}});
  j["history"] = std::move(hist);
  return indent >= 0 ? j.dump(indent) : j.dump();
}

} // namespace v2g
