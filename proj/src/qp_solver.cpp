#include "v2gflex/qp_solver.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace v2g {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

} // namespace

struct SplittingQpSolver::Impl {
  QpSettings cfg;
  int n = 0, m = 0;

  // Original (unscaled) data.
  Eigen::SparseMatrix<double> P0, A0;
  Eigen::VectorXd q0, l0, u0;
  double c0 = 0.0;

  // Equilibration: x = D xs, rows scaled by E, cost scaled by c.
  Eigen::VectorXd D, E;
  double cost_scale = 1.0;

  // Scaled data.
  Eigen::SparseMatrix<double> Ps, As, AsT;
  Eigen::VectorXd qs, ls, us;

  // Step sizes.
  double rho = 0.1;
  Eigen::ArrayXd rho_vec, rho_inv;

  // KKT system.
  Eigen::SparseMatrix<double> kkt;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
  bool pattern_done = false;

  // Iterates (scaled).
  Eigen::VectorXd xs, zs, ys;
  int last_rho_change = 0;
  int rho_adaptations = 0;
  int last_polish = 0;

  void setup(const QpProblem& p) {
    n = p.n;
    m = p.m();
    P0 = p.P;
    A0 = p.A;
    q0 = p.q;
    l0 = p.lower;
    u0 = p.upper;
    c0 = p.c0;
    compute_scaling();
    apply_scaling();
    rho = cfg.rho;
    build_rho();
    build_kkt(true);
    xs = Eigen::VectorXd::Zero(n);
    zs = Eigen::VectorXd::Zero(m);
    ys = Eigen::VectorXd::Zero(m);
  }

  // Modified Ruiz equilibration on [P A'; A 0] followed by cost scaling.
  // Zero or tiny norms are treated as unit so empty columns and q = 0 do not
  // feed the scaling loop.
  static double limit_scaling(double v) {
    if (v < 1e-4) return 1.0;
    return std::min(v, 1e4);
  }

  void compute_scaling() {
    D = Eigen::VectorXd::Ones(n);
    E = Eigen::VectorXd::Ones(m);
    cost_scale = 1.0;
    if (cfg.scaling_iters <= 0) return;

    Eigen::SparseMatrix<double> P = P0, A = A0;
    Eigen::VectorXd q = q0;
    for (int pass = 0; pass < cfg.scaling_iters; ++pass) {
      Eigen::VectorXd dcol = Eigen::VectorXd::Zero(n);
      for (int j = 0; j < n; ++j) {
        double mx = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, j); it; ++it)
          mx = std::max(mx, std::abs(it.value()));
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
          mx = std::max(mx, std::abs(it.value()));
        dcol[j] = 1.0 / std::sqrt(limit_scaling(mx));
      }
      Eigen::VectorXd erow = Eigen::VectorXd::Zero(m);
      {
        Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m);
        for (int j = 0; j < n; ++j)
          for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
            rmax[it.row()] = std::max(rmax[it.row()], std::abs(it.value() * dcol[j]));
        for (int i = 0; i < m; ++i) erow[i] = 1.0 / std::sqrt(limit_scaling(rmax[i]));
      }
      // Apply this pass.
      for (int j = 0; j < n; ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, j); it; ++it)
          it.valueRef() *= dcol[it.row()] * dcol[j];
      for (int j = 0; j < n; ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
          it.valueRef() *= erow[it.row()] * dcol[j];
      q = q.cwiseProduct(dcol);
      D = D.cwiseProduct(dcol);
      E = E.cwiseProduct(erow);

      // Cost scaling toward unit magnitude.
      double pmean = 0.0;
      for (int j = 0; j < n; ++j) {
        double mx = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, j); it; ++it)
          mx = std::max(mx, std::abs(it.value()));
        pmean += mx;
      }
      pmean = n > 0 ? pmean / n : 0.0;
      const double g = std::max(limit_scaling(pmean), limit_scaling(inf_norm(q)));
      const double cpass = 1.0 / g;
      P *= cpass;
      q *= cpass;
      cost_scale *= cpass;
    }
  }

  void apply_scaling() {
    Ps = D.asDiagonal() * P0 * D.asDiagonal();
    Ps *= cost_scale;
    As = E.asDiagonal() * A0 * D.asDiagonal();
    AsT = As.transpose();
    qs = cost_scale * D.cwiseProduct(q0);
    scale_bounds();
  }

  void scale_bounds() {
    ls.resize(m);
    us.resize(m);
    for (int i = 0; i < m; ++i) {
      ls[i] = std::isfinite(l0[i]) ? l0[i] * E[i] : l0[i];
      us[i] = std::isfinite(u0[i]) ? u0[i] * E[i] : u0[i];
    }
  }

  void build_rho() {
    rho_vec.resize(m);
    for (int i = 0; i < m; ++i) {
      const bool eq = std::isfinite(l0[i]) && std::isfinite(u0[i]) && l0[i] == u0[i];
      rho_vec[i] = eq ? rho * cfg.rho_eq_scale : rho;
    }
    rho_inv = rho_vec.inverse();
  }

  void build_kkt(bool analyze) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(Ps.nonZeros() + As.nonZeros() + n + m);
    // Lower triangle of [Ps + sigma I, As'; As, -diag(1/rho)].
    for (int j = 0; j < n; ++j) {
      bool diag_seen = false;
      for (Eigen::SparseMatrix<double>::InnerIterator it(Ps, j); it; ++it) {
        if (it.row() < j) continue;
        double v = it.value();
        if (it.row() == j) {
          v += cfg.sigma;
          diag_seen = true;
        }
        t.emplace_back(it.row(), j, v);
      }
      if (!diag_seen) t.emplace_back(j, j, cfg.sigma);
    }
    for (int j = 0; j < n; ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(As, j); it; ++it)
        t.emplace_back(n + it.row(), j, it.value());
    for (int i = 0; i < m; ++i) t.emplace_back(n + i, n + i, -rho_inv[i]);

    kkt.resize(n + m, n + m);
    kkt.setFromTriplets(t.begin(), t.end());
    if (analyze || !pattern_done) {
      ldlt.analyzePattern(kkt);
      pattern_done = true;
    }
    ldlt.factorize(kkt);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("SplittingQpSolver: KKT factorization failed");
  }

  // Unscaled views of the current iterate.
  Eigen::VectorXd x_unscaled() const { return D.cwiseProduct(xs); }
  Eigen::VectorXd y_unscaled() const {
    return (E.cwiseProduct(ys)) / cost_scale;
  }
  Eigen::VectorXd z_unscaled() const { return zs.cwiseQuotient(E); }

  QpSolution solve() {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    last_rho_change = 0;
    rho_adaptations = 0;
    last_polish = 0;

    QpSolution sol;
    Eigen::VectorXd rhs(n + m), xz(n + m);
    Eigen::VectorXd x_prev, y_prev;
    double eps_pri = 0.0, eps_dua = 0.0;

    for (int k = 1; k <= cfg.max_iter; ++k) {
      x_prev = xs;
      y_prev = ys;

      rhs.head(n) = cfg.sigma * xs - qs;
      rhs.tail(m) = zs - rho_inv.matrix().cwiseProduct(ys);
      xz = ldlt.solve(rhs);

      const auto xt = xz.head(n);
      Eigen::VectorXd zt = zs + rho_inv.matrix().cwiseProduct(xz.tail(m) - ys);

      xs = cfg.alpha * xt + (1.0 - cfg.alpha) * xs;
      Eigen::VectorXd zc =
          cfg.alpha * zt + (1.0 - cfg.alpha) * zs + rho_inv.matrix().cwiseProduct(ys);
      Eigen::VectorXd zn = zc.cwiseMax(ls).cwiseMin(us);
      // zc already carries +y/rho, so the scaled dual update is an assignment.
      ys = rho_vec.matrix().cwiseProduct(zc - zn);
      zs = zn;

      if (k % cfg.check_every != 0 && k != cfg.max_iter) continue;

      // Residuals in unscaled units.
      const Eigen::VectorXd x = x_unscaled();
      const Eigen::VectorXd y = y_unscaled();
      const Eigen::VectorXd z = z_unscaled();
      const Eigen::VectorXd Ax = A0 * x;
      const Eigen::VectorXd Px = P0 * x;
      const Eigen::VectorXd Aty = A0.transpose() * y;
      const double rp = inf_norm(Ax - z);
      const double rd = inf_norm(Px + q0 + Aty);
      eps_pri = cfg.eps_abs + cfg.eps_rel * std::max(inf_norm(Ax), inf_norm(z));
      eps_dua = cfg.eps_abs +
                cfg.eps_rel * std::max({inf_norm(Px), inf_norm(Aty), inf_norm(q0)});
      sol.primal_residual = rp;
      sol.dual_residual = rd;
      sol.iterations = k;

      if (rp <= eps_pri && rd <= eps_dua) {
        sol.status = SolveStatus::optimal;
        finish(sol);
        if (cfg.polish) polish(sol);
        return sol;
      }

      // Polishing can terminate long before the first-order tail: once the
      // iterate identifies the active set, the reduced KKT solve lands at
      // machine precision. Attempts are periodic; verification gates them.
      if (cfg.polish && k - last_polish >= cfg.polish_interval) {
        last_polish = k;
        QpSolution trial = sol;
        finish(trial);
        polish(trial);
        if (trial.primal_residual <= eps_pri && trial.dual_residual <= eps_dua) {
          trial.status = SolveStatus::optimal;
          trial.iterations = k;
          return trial;
        }
      }

      if (check_primal_infeasible(y_prev)) {
        sol.status = SolveStatus::primal_infeasible;
        finish(sol);
        return sol;
      }
      if (check_dual_infeasible(x_prev)) {
        sol.status = SolveStatus::dual_infeasible;
        finish(sol);
        return sol;
      }

      if (cfg.adaptive_rho && k - last_rho_change >= cfg.rho_adapt_interval &&
          rho_adaptations < cfg.max_rho_adaptations) {
        // Balance the normalized residuals the termination test sees.
        const double rps = rp / std::max({inf_norm(Ax), inf_norm(z), 1e-10});
        const double rds =
            rd / std::max({inf_norm(Px), inf_norm(Aty), inf_norm(q0), 1e-10});
        const double ratio = std::sqrt(rps / std::max(rds, 1e-14));
        if (std::isfinite(ratio) && (ratio > 5.0 || ratio < 0.2)) {
          rho = std::clamp(rho * ratio, 1e-6, 1e6);
          build_rho();
          build_kkt(false);
          last_rho_change = k;
          ++rho_adaptations;
          if (std::getenv("V2G_QP_TRACE"))
            fprintf(stderr, "k=%d rho->%g rps=%g rds=%g ratio=%g rp=%g rd=%g\n", k, rho,
                    rps, rds, ratio, rp, rd);
        }
      }

      if (cfg.time_limit_s > 0.0) {
        const double el = std::chrono::duration<double>(clock::now() - t0).count();
        if (el > cfg.time_limit_s) break;
      }
    }
    sol.status = SolveStatus::max_iter;
    finish(sol);
    if (cfg.polish) polish(sol);
    return sol;
  }

  // Active-set refinement seeded by the splitting iterate. Rows the duals
  // (or, optionally, the primal iterate) mark active are pinned at their
  // bounds and the reduced KKT is solved directly; pins with wrong-signed
  // multipliers are dropped and violated rows are added until the set
  // settles. The primal regularization is anchored at the iterate so
  // cost-flat directions stay where the iterate left them. The result
  // replaces the iterate only if it improves the worse residual.
  bool polish_attempt(QpSolution& sol, bool pin_primal) const {
    const Eigen::VectorXd z = z_unscaled();
    const double near = std::max(10.0 * sol.primal_residual, 1e-8);

    // side per row: 0 free, -1 pinned at lower, +1 pinned at upper, 2 equality.
    std::vector<int8_t> side(m, 0);
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(l0[i]) && std::isfinite(u0[i]) && l0[i] == u0[i]) {
        side[i] = 2;
        continue;
      }
      const bool at_lower = pin_primal && std::isfinite(l0[i]) &&
                            z[i] - l0[i] <= near * (1.0 + std::abs(l0[i]));
      const bool at_upper = pin_primal && std::isfinite(u0[i]) &&
                            u0[i] - z[i] <= near * (1.0 + std::abs(u0[i]));
      bool lo = std::isfinite(l0[i]) && (sol.y[i] < 0.0 || at_lower);
      bool hi = std::isfinite(u0[i]) && (sol.y[i] > 0.0 || at_upper);
      if (lo && hi) {
        if (z[i] - l0[i] <= u0[i] - z[i])
          hi = false;
        else
          lo = false;
      }
      side[i] = lo ? -1 : (hi ? 1 : 0);
    }

    const double delta = cfg.polish_delta;
    Eigen::VectorXd xp, yp;
    for (int round = 0; round < 10; ++round) {
      std::vector<int> act;
      for (int i = 0; i < m; ++i)
        if (side[i] != 0) act.push_back(i);
      const int k = static_cast<int>(act.size());

      std::vector<Eigen::Triplet<double>> t;
      t.reserve(P0.nonZeros() + A0.nonZeros() + n + k);
      for (int j = 0; j < n; ++j) {
        bool diag = false;
        for (Eigen::SparseMatrix<double>::InnerIterator it(P0, j); it; ++it) {
          if (it.row() < j) continue;
          double v = it.value();
          if (it.row() == j) {
            v += delta;
            diag = true;
          }
          t.emplace_back(it.row(), j, v);
        }
        if (!diag) t.emplace_back(j, j, delta);
      }
      std::vector<int> row_of(m, -1);
      for (int a = 0; a < k; ++a) row_of[act[a]] = a;
      for (int j = 0; j < n; ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A0, j); it; ++it)
          if (row_of[it.row()] >= 0) t.emplace_back(n + row_of[it.row()], j, it.value());
      for (int a = 0; a < k; ++a) t.emplace_back(n + a, n + a, -delta);

      Eigen::SparseMatrix<double> K(n + k, n + k);
      K.setFromTriplets(t.begin(), t.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> fac;
      fac.compute(K);
      if (fac.info() != Eigen::Success) return false;

      Eigen::SparseMatrix<double> Aact(k, n);
      {
        std::vector<Eigen::Triplet<double>> ta;
        for (int j = 0; j < n; ++j)
          for (Eigen::SparseMatrix<double>::InnerIterator it(A0, j); it; ++it)
            if (row_of[it.row()] >= 0)
              ta.emplace_back(row_of[it.row()], it.col(), it.value());
        Aact.setFromTriplets(ta.begin(), ta.end());
      }

      Eigen::VectorXd rhs(n + k);
      rhs.head(n) = -q0 + delta * sol.x; // anchor flat directions
      for (int a = 0; a < k; ++a)
        rhs[n + a] = side[act[a]] == 1 ? u0[act[a]] : l0[act[a]];
      Eigen::VectorXd w = fac.solve(rhs);
      for (int ref = 0; ref < cfg.polish_refine_iters; ++ref) {
        Eigen::VectorXd r(n + k);
        r.head(n) = -q0 - P0 * w.head(n) - Aact.transpose() * w.tail(k);
        r.tail(k) = rhs.tail(k) - Aact * w.head(n);
        w += fac.solve(r);
      }

      xp = w.head(n);
      yp = Eigen::VectorXd::Zero(m);
      for (int a = 0; a < k; ++a) yp[act[a]] = w[n + a];

      double ymax = 1.0;
      for (int a = 0; a < k; ++a) ymax = std::max(ymax, std::abs(w[n + a]));
      const Eigen::VectorXd Axp = A0 * xp;

      // Drop wrong-signed pins, add violated rows.
      bool changed = false;
      for (int a = 0; a < k; ++a) {
        const int i = act[a];
        if (side[i] == 2) continue;
        if ((side[i] == -1 && w[n + a] > 1e-9 * ymax) ||
            (side[i] == 1 && w[n + a] < -1e-9 * ymax)) {
          side[i] = 0;
          changed = true;
        }
      }
      for (int i = 0; i < m; ++i) {
        if (side[i] != 0) continue;
        if (std::isfinite(l0[i]) && Axp[i] < l0[i] - 1e-10 * (1.0 + std::abs(l0[i]))) {
          side[i] = -1;
          changed = true;
        } else if (std::isfinite(u0[i]) &&
                   Axp[i] > u0[i] + 1e-10 * (1.0 + std::abs(u0[i]))) {
          side[i] = 1;
          changed = true;
        }
      }
      if (!changed) break;
      if (round == 9) return false;
    }

    const Eigen::VectorXd Axp = A0 * xp;
    double rp = 0.0;
    for (int i = 0; i < m; ++i) {
      double v = 0.0;
      if (std::isfinite(l0[i])) v = std::max(v, l0[i] - Axp[i]);
      if (std::isfinite(u0[i])) v = std::max(v, Axp[i] - u0[i]);
      rp = std::max(rp, v);
    }
    const double rd = inf_norm(P0 * xp + q0 + A0.transpose() * yp);
    if (std::getenv("V2G_QP_TRACE"))
      fprintf(stderr, "polish(pin_primal=%d): rp=%g rd=%g (iter rp=%g rd=%g)\n",
              (int)pin_primal, rp, rd, sol.primal_residual, sol.dual_residual);
    if (std::max(rp, rd) < std::max(sol.primal_residual, sol.dual_residual)) {
      sol.x = xp;
      sol.y = yp;
      sol.primal_residual = rp;
      sol.dual_residual = rd;
      sol.objective = 0.5 * xp.dot(P0 * xp) + q0.dot(xp) + c0;
      return true;
    }
    return false;
  }

  void polish(QpSolution& sol) const {
    if (!polish_attempt(sol, false)) polish_attempt(sol, true);
  }

  void finish(QpSolution& sol) const {
    sol.x = x_unscaled();
    sol.y = y_unscaled();
    sol.objective = 0.5 * sol.x.dot(P0 * sol.x) + q0.dot(sol.x) + c0;
  }

  bool check_primal_infeasible(const Eigen::VectorXd& ys_prev) const {
    Eigen::VectorXd dy = (E.cwiseProduct(ys - ys_prev)) / cost_scale;
    const double nrm = inf_norm(dy);
    if (nrm <= 1e-14) return false;
    dy /= nrm;
    if (inf_norm(A0.transpose() * dy) > cfg.eps_pinf) return false;
    double support = 0.0;
    for (int i = 0; i < m; ++i) {
      if (dy[i] > cfg.eps_pinf) {
        if (!std::isfinite(u0[i])) return false;
        support += u0[i] * dy[i];
      } else if (dy[i] < -cfg.eps_pinf) {
        if (!std::isfinite(l0[i])) return false;
        support += l0[i] * dy[i];
      }
    }
    return support < -cfg.eps_pinf;
  }

  bool check_dual_infeasible(const Eigen::VectorXd& xs_prev) const {
    Eigen::VectorXd dx = D.cwiseProduct(xs - xs_prev);
    const double nrm = inf_norm(dx);
    if (nrm <= 1e-14) return false;
    dx /= nrm;
    if (inf_norm(P0 * dx) > cfg.eps_dinf) return false;
    if (q0.dot(dx) > -cfg.eps_dinf) return false;
    const Eigen::VectorXd Adx = A0 * dx;
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(u0[i]) && Adx[i] > cfg.eps_dinf) return false;
      if (std::isfinite(l0[i]) && Adx[i] < -cfg.eps_dinf) return false;
    }
    return true;
  }
};

SplittingQpSolver::SplittingQpSolver(const QpProblem& p, QpSettings settings)
    : impl_(std::make_unique<Impl>()) {
  impl_->cfg = settings;
  impl_->setup(p);
}

SplittingQpSolver::~SplittingQpSolver() = default;
SplittingQpSolver::SplittingQpSolver(SplittingQpSolver&&) noexcept = default;
SplittingQpSolver& SplittingQpSolver::operator=(SplittingQpSolver&&) noexcept = default;

void SplittingQpSolver::update_lin_cost(const Eigen::VectorXd& q) {
  impl_->q0 = q;
  impl_->qs = impl_->cost_scale * impl_->D.cwiseProduct(q);
}

void SplittingQpSolver::update_bounds(const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper) {
  // Step sizes keep their construction-time classification so bound updates
  // never trigger a refactorization (branch-and-bound pins rows per node).
  impl_->l0 = lower;
  impl_->u0 = upper;
  impl_->scale_bounds();
}

void SplittingQpSolver::update_quad_cost(const Eigen::SparseMatrix<double>& P) {
  impl_->P0 = P;
  impl_->Ps = impl_->D.asDiagonal() * P * impl_->D.asDiagonal();
  impl_->Ps *= impl_->cost_scale;
  impl_->build_kkt(false);
}

void SplittingQpSolver::warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  impl_->xs = x.cwiseQuotient(impl_->D);
  impl_->ys = impl_->cost_scale * y.cwiseQuotient(impl_->E);
  impl_->zs = (impl_->As * impl_->xs).cwiseMax(impl_->ls).cwiseMin(impl_->us);
}

void SplittingQpSolver::cold_start() {
  impl_->xs.setZero();
  impl_->ys.setZero();
  impl_->zs.setZero();
}

QpSolution SplittingQpSolver::solve() { return impl_->solve(); }

const QpSettings& SplittingQpSolver::settings() const { return impl_->cfg; }

void SplittingQpSolver::set_tolerances(double eps_abs, double eps_rel) {
  impl_->cfg.eps_abs = eps_abs;
  impl_->cfg.eps_rel = eps_rel;
}

QpSolution solve_qp(const QpProblem& p, const QpSettings& settings) {
  if (!p.binary_vars.empty())
    throw std::invalid_argument("solve_qp: problem has binary variables, use solve_miqp_bb");
  SplittingQpSolver solver(p, settings);
  return solver.solve();
}

QpSolution solve_qp(const QpProblem& p, double tol_abs, double tol_rel, int max_iter) {
  QpSettings s;
  s.eps_abs = tol_abs;
  s.eps_rel = tol_rel;
  s.max_iter = max_iter;
  return solve_qp(p, s);
}

} // namespace v2g
