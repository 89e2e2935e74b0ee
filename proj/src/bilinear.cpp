#include "v2gflex/bilinear.hpp"

#include <random>
#include <stdexcept>

namespace v2g {

Eigen::VectorXd taylor_linearization(const Eigen::VectorXd& x_prev,
                                     const Eigen::VectorXd& y_prev,
                                     const Eigen::VectorXd& x_cur,
                                     const Eigen::VectorXd& y_cur) {
  if (x_prev.size() != y_prev.size() || x_prev.size() != x_cur.size() ||
      x_prev.size() != y_cur.size())
    throw std::invalid_argument("taylor_linearization: length mismatch");
  return x_prev.cwiseProduct(y_prev) + x_prev.cwiseProduct(y_cur - y_prev) +
         y_prev.cwiseProduct(x_cur - x_prev);
}

std::pair<double, double> wang_projection(double a, double b) {
  const double ap = std::max(a, 0.0), bp = std::max(b, 0.0);
  const double d1 = (a - ap) * (a - ap) + b * b; // keep x, drop y
  const double d2 = a * a + (b - bp) * (b - bp); // keep y, drop x
  if (d1 <= d2) return {ap, 0.0};
  return {0.0, bp};
}

Eigen::VectorXd wang_projection(const Eigen::VectorXd& stacked) {
  const int T = static_cast<int>(stacked.size()) / 2;
  Eigen::VectorXd out(2 * T);
  for (int t = 0; t < T; ++t) {
    auto [x, y] = wang_projection(stacked[t], stacked[T + t]);
    out[t] = x;
    out[T + t] = y;
  }
  return out;
}

RelaxationState RelaxationState::make(BilinearMode mode, int T, double rho_b,
                                      double gamma_b, double alpha) {
  RelaxationState s;
  s.mode = mode;
  s.T = T;
  s.rho_b = rho_b;
  s.gamma_b = gamma_b;
  s.alpha = alpha;
  s.z_prev = Eigen::VectorXd::Zero(2 * T);
  s.z_cur = Eigen::VectorXd::Zero(2 * T);
  s.w = Eigen::VectorXd::Zero(T);
  s.lambda_t = Eigen::VectorXd::Zero(T);
  s.z_tilde = Eigen::VectorXd::Zero(2 * T);
  s.lambda_w = Eigen::VectorXd::Zero(2 * T);
  return s;
}

void RelaxationState::randomize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u01 = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int i = 0; i < 2 * T; ++i) {
    z_cur[i] = u01();
    z_tilde[i] = u01();
    lambda_w[i] = 0.1 * (u01() - 0.5);
  }
  for (int i = 0; i < T; ++i) {
    w[i] = u01();
    lambda_t[i] = 0.1 * (u01() - 0.5);
  }
  z_prev = z_cur;
}

double RelaxationState::compl_residual() const {
  double r = 0.0;
  for (int t = 0; t < T; ++t) r = std::max(r, z_cur[t] * z_cur[T + t]);
  return r;
}

double RelaxationState::copy_compl_residual() const {
  double r = 0.0;
  for (int t = 0; t < T; ++t) r = std::max(r, z_tilde[t] * z_tilde[T + t]);
  return r;
}

// Taylor relaxation, one pass. The printed reading penalizes the controls
// against the linearization value c~(z^k, z^{k-1}) directly (a constant
// target, broadcast to both control halves); the derived reading penalizes
// the affine linearization c~(z, z^k) against the shrunk auxiliary w, which
// vanishes on the complementarity manifold and so carries no ridge bias.
// Tests compare both; the derived form is the default.
RelaxationState taylor_iterate(RelaxationState s, const StationSolveHook& solve) {
  const int T = s.T;
  const auto x_prev = s.z_prev.head(T), y_prev = s.z_prev.tail(T);
  const auto x_cur = s.z_cur.head(T), y_cur = s.z_cur.tail(T);
  const Eigen::VectorXd c_const = taylor_linearization(x_prev, y_prev, x_cur, y_cur);

  RelaxPenalty pen;
  if (s.taylor_form == TaylorForm::printed) {
    pen.form = RelaxPenalty::Form::diagonal;
    pen.coeff = s.rho_b;
    pen.target.resize(2 * T);
    pen.target.head(T) = c_const - s.lambda_t;
    pen.target.tail(T) = c_const - s.lambda_t;
  } else {
    // c~(z, z^k) = y_cur.*x + x_cur.*y - x_cur.*y_cur, pulled toward w + lambda.
    pen.form = RelaxPenalty::Form::pairwise;
    pen.coeff = s.rho_b;
    pen.pa = y_cur;
    pen.pb = x_cur;
    pen.pd = x_cur.cwiseProduct(y_cur) + s.w + s.lambda_t;
  }

  Eigen::VectorXd z_new = solve(pen);

  const Eigen::VectorXd c_upd =
      s.taylor_form == TaylorForm::printed
          ? c_const
          : taylor_linearization(x_cur, y_cur, z_new.head(T), z_new.tail(T));

  const double beta = s.rho_b / (s.rho_b + s.gamma_b);
  if (s.taylor_form == TaylorForm::printed)
    s.w = beta * (c_upd + s.lambda_t); // as printed
  else
    s.w = beta * (c_upd - s.lambda_t); // analytic argmin of the w-step
  s.lambda_t += s.w - c_upd;

  z_new = s.alpha * z_new + (1.0 - s.alpha) * s.z_cur;
  s.z_prev = s.z_cur;
  s.z_cur = z_new;
  return s;
}

// Wang relaxation, one pass: quadratic pull toward the feasible copy, exact
// projection of the copy, dual ascent on the gap. The copy satisfies the
// complementarity constraint at every iteration by construction.
RelaxationState wang_iterate(RelaxationState s, const StationSolveHook& solve) {
  RelaxPenalty pen;
  pen.form = RelaxPenalty::Form::diagonal;
  pen.coeff = s.rho_b;
  pen.target = s.z_tilde - s.lambda_w;

  Eigen::VectorXd z_new = solve(pen);

  const Eigen::VectorXd v =
      s.wang_projects_copy ? (s.z_tilde - s.lambda_w).eval() : (z_new + s.lambda_w).eval();
  s.z_tilde = wang_projection(v);
  s.lambda_w += z_new - s.z_tilde;

  if (s.alpha != 1.0) z_new = s.alpha * z_new + (1.0 - s.alpha) * s.z_cur;
  s.z_prev = s.z_cur;
  s.z_cur = z_new;
  return s;
}

RelaxationState relaxation_iterate(RelaxationState s, const StationSolveHook& solve) {
  switch (s.mode) {
    case BilinearMode::taylor: return taylor_iterate(std::move(s), solve);
    case BilinearMode::wang: return wang_iterate(std::move(s), solve);
    default: throw std::invalid_argument("relaxation_iterate: mode has no relaxation");
  }
}

double compute_jc(const FleetSchedule& sched, const Scenario& sc, double gamma,
                  const Eigen::MatrixXd* u_c_prev, const Eigen::MatrixXd* u_d_prev) {
  double jc = 0.0;
  for (int s = 0; s < sc.n_stations(); ++s)
    jc += eval_station_objective(sc.objectives.station, sc.stations[s],
                                 sched.station_power.col(s), sched.dt_h);
  jc += eval_system_objective(sc.objectives.system, sched.fleet_power(), sched.dt_h);
  jc += eval_soc_penalty(sc.timeline, sched.x, sc.objectives.soc_penalty_k);
  if (gamma > 0.0 && u_c_prev) {
    jc += 0.5 * gamma * (sched.u_c - *u_c_prev).squaredNorm();
    if (u_d_prev) jc += 0.5 * gamma * (sched.u_d - *u_d_prev).squaredNorm();
  }
  return jc;
}

} // namespace v2g
