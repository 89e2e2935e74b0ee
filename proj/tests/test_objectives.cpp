#include <doctest.h>

#include "v2gflex/objectives.hpp"
#include "v2gflex/qp_solver.hpp"

using namespace v2g;

namespace {

QpSettings tight() {
  QpSettings s;
  s.eps_abs = 1e-10;
  s.eps_rel = 1e-10;
  return s;
}

StationSpec station_with_prices(int T, double buy, double sell) {
  StationSpec st;
  st.id = 0;
  st.n_max_chargers = 4;
  st.p_max_kw = 100;
  st.base_load_kw.assign(T, 0.0);
  st.pv_kw.assign(T, 0.0);
  st.buy_price.assign(T, buy);
  st.sell_price.assign(T, sell);
  return st;
}

} // namespace

TEST_CASE("energy cost epigraph hits the max of the two affine pieces") {
  const int T = 1;
  auto st = station_with_prices(T, 0.2, 0.1);

  auto run = [&](double p_fixed) {
    QpBuilder b;
    int p0 = b.add_vars("p", T, p_fixed, p_fixed);
    int y0 = build_station_objective(b, ObjectiveSpec{ObjectiveKind::energy_cost}, st, p0,
                                     T, 0.25);
    auto sol = solve_qp(b.build(), tight());
    REQUIRE(sol.ok());
    return std::pair<double, double>(sol.x[y0], sol.objective);
  };

  auto [y1, c1] = run(10.0);
  CHECK(y1 == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(c1 == doctest::Approx(0.5).epsilon(1e-6));
  auto [y2, c2] = run(0.0);
  CHECK(y2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  CHECK(c2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  auto [y3, c3] = run(-10.0);
  CHECK(y3 == doctest::Approx(-1.0).epsilon(1e-6)); // max(-2, -1)
  CHECK(c3 == doctest::Approx(-0.25).epsilon(1e-6));

  // Direct evaluator agrees.
  Eigen::VectorXd p(1);
  p << -10.0;
  CHECK(eval_station_objective(ObjectiveSpec{ObjectiveKind::energy_cost}, st, p, 0.25) ==
        doctest::Approx(-0.25));
}

TEST_CASE("energy cost rejects sell above buy") {
  auto st = station_with_prices(2, 0.1, 0.2);
  QpBuilder b;
  int p0 = b.add_vars("p", 2, 0, 0);
  CHECK_THROWS_AS(build_station_objective(b, ObjectiveSpec{ObjectiveKind::energy_cost}, st,
                                          p0, 2, 0.25),
                  std::invalid_argument);
  CHECK_THROWS(st.validate(2));
}

TEST_CASE("soft SOC penalty is one-sided and quadratic") {
  auto run = [&](double e, double x_fixed, double k) {
    QpBuilder b;
    // x block with 2 states; e(0) bounds the state leaving step 0 (= x_1).
    b.add_var("x0", 0.0, 0.0);
    b.add_var("x1", x_fixed, x_fixed);
    Eigen::SparseMatrix<double> em(1, 1);
    if (e > 0) em.insert(0, 0) = e;
    build_soc_penalty(b, em, [&](int k_, int) { return k_; }, k);
    auto sol = solve_qp(b.build(), tight());
    REQUIRE(sol.ok());
    return sol.objective;
  };
  CHECK(run(6.0, 6.0, 1e4) == doctest::Approx(0.0).scale(1e4).epsilon(1e-9));
  CHECK(run(6.0, 5.0, 1e4) == doctest::Approx(1e4).epsilon(1e-6));
  CHECK(run(6.0, 7.5, 1e4) == doctest::Approx(0.0).scale(1e4).epsilon(1e-9));
  CHECK_THROWS(run(6.0, 5.0, 0.0));
}

TEST_CASE("soc penalty evaluator matches finite differences") {
  ScenarioTimeline tl;
  tl.dt_h = 0.25;
  tl.T = 4;
  tl.l.setOnes(4, 1);
  tl.e.resize(4, 1);
  tl.e.insert(2, 1 - 1) = 8.0;
  tl.delta_e.resize(4, 1);
  Eigen::MatrixXd x(5, 1);
  x << 5, 5.5, 6, 6.5, 7;
  const double k = 1e3;
  const double h = 1e-6;
  // d Q / d x(3,0): e(2) binds x index 3.
  Eigen::MatrixXd xp = x, xm = x;
  xp(3, 0) += h;
  xm(3, 0) -= h;
  const double fd = (eval_soc_penalty(tl, xp, k) - eval_soc_penalty(tl, xm, k)) / (2 * h);
  const double analytic = -2.0 * k * std::max(8.0 - x(3, 0), 0.0);
  CHECK(fd == doctest::Approx(analytic).epsilon(1e-5));
}

TEST_CASE("self consumption and fast charge") {
  const int T = 4;
  auto st = station_with_prices(T, 0.2, 0.1);
  Eigen::VectorXd p(T);
  p << 5, 5, 5, 5;
  CHECK(eval_station_objective(ObjectiveSpec{ObjectiveKind::self_consumption}, st, p, 0.25) ==
        doctest::Approx(20.0));
  Eigen::VectorXd exp_only(T);
  exp_only << -1, -2, 0, -1;
  CHECK(eval_station_objective(ObjectiveSpec{ObjectiveKind::self_consumption}, st, exp_only,
                               0.25) < 0.0);

  // d == 1 reduces fast_charge to self_consumption.
  ObjectiveSpec fc{ObjectiveKind::fast_charge};
  fc.discount.assign(T, 1.0);
  CHECK(eval_station_objective(fc, st, p, 0.25) == doctest::Approx(20.0));

  // Increasing d puts a forced charge at the earliest step: enumerate both
  // placements of a 2-step, 1-kWh charge.
  ObjectiveSpec ramp{ObjectiveKind::fast_charge};
  ramp.discount = {0.5, 1.0};
  Eigen::VectorXd early(2), late(2);
  early << 4, 0;
  late << 0, 4;
  CHECK(eval_station_objective(ramp, st, early, 0.25) <
        eval_station_objective(ramp, st, late, 0.25));

  QpBuilder b;
  int p0 = b.add_vars("p", 2, 0.0, 10.0);
  b.add_row(4.0, {{p0, 1.0}, {p0 + 1, 1.0}}, 4.0); // total energy pinned
  build_station_objective(b, ramp, st, p0, 2, 0.25);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  CHECK(sol.x[p0] == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(sol.x[p0 + 1] == doctest::Approx(0.0).scale(4.0).epsilon(1e-7));
}

TEST_CASE("peak shaving flattens an equal-energy profile") {
  const int T = 2;
  auto st = station_with_prices(T, 0.2, 0.1);
  Eigen::VectorXd flat(2), spiky(2);
  flat << 2, 2;
  spiky << 4, 0;
  ObjectiveSpec ps{ObjectiveKind::peak_shave};
  CHECK(eval_station_objective(ps, st, flat, 0.25) <
        eval_station_objective(ps, st, spiky, 0.25));

  QpBuilder b;
  int p0 = b.add_vars("p", 2, -10.0, 10.0);
  b.add_row(4.0, {{p0, 1.0}, {p0 + 1, 1.0}}, 4.0);
  build_station_objective(b, ps, st, p0, 2, 0.25);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  CHECK(sol.x[p0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.x[p0 + 1] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(eval_station_objective(ps, st, Eigen::VectorXd::Zero(2), 0.25) == 0.0);
}

TEST_CASE("tracking and linear flexibility objectives") {
  const int T = 16;
  ObjectiveSpec track{ObjectiveKind::track_profile};
  track.reference.assign(T, 3.0);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(T, 3.0);
  CHECK(eval_system_objective(track, g, 0.25) == doctest::Approx(0.0));

  // 2 MW deviation over 4 steps of 0.25 h at 100 /MWh prices 200.
  ObjectiveSpec flex{ObjectiveKind::flex_linear};
  flex.reference.assign(T, 0.0);
  flex.flex_price_mwh = 100.0;
  flex.flex_steps = {4, 5, 6, 7};
  Eigen::VectorXd dev = Eigen::VectorXd::Zero(T);
  for (int t : flex.flex_steps) dev[t] = 2000.0; // kW
  CHECK(eval_system_objective(flex, dev, 0.25) == doctest::Approx(200.0).epsilon(1e-12));

  // p_f = 0 vanishes.
  flex.flex_price_mwh = 0.0;
  CHECK(eval_system_objective(flex, dev, 0.25) == 0.0);

  // Builder matches the evaluator at a pinned point.
  flex.flex_price_mwh = 100.0;
  QpBuilder b;
  int g0 = b.add_vars("g", T, 0, 0);
  for (int t : flex.flex_steps) b.set_bounds(g0 + t, 2000.0, 2000.0);
  build_system_objective(b, flex, g0, T, 0.25);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  CHECK(sol.objective == doctest::Approx(200.0).epsilon(1e-6));
}

TEST_CASE("builders are additive") {
  const int T = 3;
  auto st = station_with_prices(T, 0.3, 0.05);
  Eigen::VectorXd p(T);
  p << 4, -2, 1;
  QpBuilder b;
  int p0 = b.add_vars("p", T, 0, 0);
  for (int t = 0; t < T; ++t) b.set_bounds(p0 + t, p[t], p[t]);
  build_station_objective(b, ObjectiveSpec{ObjectiveKind::energy_cost}, st, p0, T, 0.5);
  build_station_objective(b, ObjectiveSpec{ObjectiveKind::peak_shave}, st, p0, T, 0.5);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  const double expect =
      eval_station_objective(ObjectiveSpec{ObjectiveKind::energy_cost}, st, p, 0.5) +
      eval_station_objective(ObjectiveSpec{ObjectiveKind::peak_shave}, st, p, 0.5);
  CHECK(sol.objective == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("epigraph exactness at the optimum") {
  const int T = 6;
  StationSpec st = station_with_prices(T, 0.25, 0.08);
  for (int t = 0; t < T; ++t) st.buy_price[t] += 0.01 * t;
  QpBuilder b;
  int p0 = b.add_vars("p", T, -8.0, 8.0);
  // Mild quadratic pull toward an alternating profile so p lands interior.
  for (int t = 0; t < T; ++t) {
    b.add_quad(p0 + t, p0 + t, 0.5);
    b.add_lin(p0 + t, t % 2 ? 3.0 : -3.0);
  }
  int y0 = build_station_objective(b, ObjectiveSpec{ObjectiveKind::energy_cost}, st, p0, T,
                                   0.25);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  for (int t = 0; t < T; ++t) {
    const double p = sol.x[p0 + t];
    const double want = std::max(st.buy_price[t] * p, st.sell_price[t] * p);
    CHECK(sol.x[y0 + t] == doctest::Approx(want).scale(1.0).epsilon(1e-6));
  }
}

TEST_CASE("hour_to_steps maps the diurnal grid") {
  auto s = hour_to_steps(12, 0.25, 96);
  CHECK(s == std::vector<int>{48, 49, 50, 51});
  CHECK(hour_to_steps(0, 0.25, 96) == std::vector<int>{0, 1, 2, 3});
  CHECK(hour_to_steps(5, 1.0, 24) == std::vector<int>{5});
  CHECK(hour_to_steps(23, 0.25, 12).empty()); // horizon too short
}
