#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "v2gflex/qp.hpp"
#include "v2gflex/qp_solver.hpp"

using namespace v2g;

namespace {

QpSettings tight() {
  QpSettings s;
  s.eps_abs = 1e-9;
  s.eps_rel = 1e-9;
  return s;
}

// Random box-bounded QP with a guaranteed feasible point.
QpProblem random_qp(std::mt19937_64& rng, int n, int m_extra) {
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = un(rng);
  Eigen::MatrixXd Pd = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);

  QpBuilder b;
  for (int i = 0; i < n; ++i) b.add_var("x" + std::to_string(i), -5.0, 5.0);
  for (int i = 0; i < n; ++i) {
    b.add_quad(i, i, 0.5 * Pd(i, i));
    for (int j = i + 1; j < n; ++j) b.add_quad(i, j, Pd(i, j));
    b.add_lin(i, un(rng));
  }
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = 0.5 * un(rng);
  for (int r = 0; r < m_extra; ++r) {
    std::vector<std::pair<int, double>> coeffs;
    double ax0 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = un(rng);
      coeffs.push_back({i, c});
      ax0 += c * x0[i];
    }
    std::uniform_real_distribution<double> slack(0.05, 1.5);
    b.add_row(ax0 - slack(rng), coeffs, ax0 + slack(rng));
  }
  return b.build();
}

} // namespace

TEST_CASE("solve_qp: projection onto halfspace") {
  QpBuilder b;
  int x = b.add_var("x", -kInf, kInf);
  b.add_quad(x, x, 1.0); // x^2
  b.add_row(1.0, {{x, 1.0}}, kInf);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solve_qp: symmetric active constraint") {
  QpBuilder b;
  int x = b.add_var("x", -kInf, kInf);
  int y = b.add_var("y", -kInf, kInf);
  // (x-2)^2 + (y-2)^2
  b.add_quad(x, x, 1.0);
  b.add_quad(y, y, 1.0);
  b.add_lin(x, -4.0);
  b.add_lin(y, -4.0);
  b.add_const(8.0);
  b.add_row(-kInf, {{x, 1.0}, {y, 1.0}}, 2.0);
  auto sol = solve_qp(b.build(), tight());
  REQUIRE(sol.ok());
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.x[y] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("solve_qp: contradictory bounds are infeasible") {
  QpBuilder b;
  int x = b.add_var("x", -kInf, kInf);
  b.add_quad(x, x, 1.0);
  b.add_row(1.0, {{x, 1.0}}, kInf);
  b.add_row(-kInf, {{x, 1.0}}, 0.0);
  auto sol = solve_qp(b.build(), tight());
  CHECK(sol.status == SolveStatus::primal_infeasible);
}

TEST_CASE("solve_qp: unbounded direction is flagged") {
  QpBuilder b;
  int x = b.add_var("x", -kInf, kInf);
  b.add_lin(x, 1.0);
  auto sol = solve_qp(b.build(), tight());
  CHECK(sol.status == SolveStatus::dual_infeasible);
}

TEST_CASE("solve_qp: agrees with dense active-set oracle on random QPs") {
  std::mt19937_64 rng(42);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 4);       // 2..5
    const int m_extra = 1 + static_cast<int>(rng() % 3); // 1..3
    QpProblem p = random_qp(rng, n, m_extra);
    auto oracle = test::dense_qp_oracle(p);
    REQUIRE(oracle.feasible);
    auto sol = solve_qp(p, tight());
    REQUIRE(sol.ok());
    CHECK(sol.objective ==
          doctest::Approx(oracle.objective).epsilon(1e-6).scale(1.0));
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("solve_qp: scaling invariance of the argmin") {
  std::mt19937_64 rng(7);
  QpProblem p = random_qp(rng, 4, 2);
  auto s1 = solve_qp(p, tight());
  QpProblem p2 = p;
  p2.P = p.P * 250.0;
  p2.q = p.q * 250.0;
  auto s2 = solve_qp(p2, tight());
  REQUIRE(s1.ok());
  REQUIRE(s2.ok());
  for (int i = 0; i < p.n; ++i)
    CHECK(s2.x[i] == doctest::Approx(s1.x[i]).epsilon(1e-5).scale(1.0));
  CHECK(s2.objective == doctest::Approx(250.0 * s1.objective).epsilon(1e-6));
}

TEST_CASE("solver instance: warm re-solve after cost update") {
  std::mt19937_64 rng(11);
  QpProblem p = random_qp(rng, 5, 3);
  SplittingQpSolver solver(p, tight());
  auto s1 = solver.solve();
  REQUIRE(s1.ok());

  Eigen::VectorXd q2 = p.q;
  q2[0] += 0.25;
  solver.update_lin_cost(q2);
  solver.warm_start(s1.x, s1.y);
  auto s2 = solver.solve();
  REQUIRE(s2.ok());

  QpProblem pp = p;
  pp.q = q2;
  auto fresh = solve_qp(pp, tight());
  CHECK(s2.objective == doctest::Approx(fresh.objective).epsilon(1e-6));
  CHECK(s2.iterations <= s1.iterations); // warm start should not be slower
}

TEST_CASE("qp: validation and export") {
  QpBuilder b;
  int x = b.add_var("x", 0.0, 1.0);
  b.add_quad(x, x, 1.0);
  b.mark_binary(x);
  QpProblem p = b.build();
  CHECK_NOTHROW(p.validate());
  std::ostringstream os;
  p.export_triplets(os);
  CHECK(os.str().find("binary 1") != std::string::npos);

  QpProblem bad = p;
  bad.lower[0] = 2.0; // lower > upper
  CHECK_THROWS(bad.validate());
}
