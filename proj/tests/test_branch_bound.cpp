#include <doctest.h>

#include <random>

#include "v2gflex/branch_bound.hpp"

using namespace v2g;

namespace {

QpSettings tightqp() {
  QpSettings s;
  s.eps_abs = 1e-9;
  s.eps_rel = 1e-9;
  return s;
}

} // namespace

TEST_CASE("bb: no binaries degenerates to solve_qp") {
  QpBuilder b;
  int x = b.add_var("x", -kInf, kInf);
  b.add_quad(x, x, 1.0);
  b.add_lin(x, -2.0);
  auto sol = solve_miqp_bb(b.build(), 1e-8, 100);
  REQUIRE(sol.ok());
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bb: single indicator binary") {
  // min (x-0.5)^2 s.t. 0 <= x <= b, b binary -> b=1, x=0.5
  QpBuilder b;
  int x = b.add_var("x", 0.0, kInf);
  int bin = b.add_var("b", 0.0, 1.0);
  b.mark_binary(bin);
  b.add_quad(x, x, 1.0);
  b.add_lin(x, -1.0);
  b.add_const(0.25);
  b.add_row(-kInf, {{x, 1.0}, {bin, -1.0}}, 0.0); // x <= b
  MiqpSettings ms;
  ms.qp = tightqp();
  auto sol = solve_miqp_bb(b.build(), ms);
  REQUIRE(sol.ok());
  CHECK(sol.x[bin] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sol.x[x] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(sol.objective == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("bb: complementarity pair picks the cheap side") {
  // min (x-1)^2 + 2(y-1)^2, x <= 10 b, y <= 10 (1-b): keeping y costs more.
  QpBuilder b;
  int x = b.add_var("x", 0.0, kInf);
  int y = b.add_var("y", 0.0, kInf);
  int bin = b.add_var("b", 0.0, 1.0);
  b.mark_binary(bin);
  b.add_quad(x, x, 1.0);
  b.add_lin(x, -2.0);
  b.add_quad(y, y, 2.0);
  b.add_lin(y, -4.0);
  b.add_const(3.0);
  b.add_row(-kInf, {{x, 1.0}, {bin, -10.0}}, 0.0);
  b.add_row(-kInf, {{y, 1.0}, {bin, 10.0}}, 10.0);
  MiqpSettings ms;
  ms.qp = tightqp();
  auto sol = solve_miqp_bb(b.build(), ms);
  REQUIRE(sol.ok());
  // b=1: x=1 free, y=0 -> cost 2. b=0: x=0, y=1 -> cost 1. Optimal b=0.
  CHECK(sol.x[bin] == doctest::Approx(0.0).scale(1.0).epsilon(1e-5));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("bb: matches exhaustive enumeration on random MIQPs") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 3;
    const int nb = 1 + static_cast<int>(rng() % 3); // 1..3 binaries
    QpBuilder b;
    std::vector<int> cont, bins;
    for (int i = 0; i < n; ++i) cont.push_back(b.add_var("x" + std::to_string(i), -3.0, 3.0));
    for (int i = 0; i < nb; ++i) {
      int v = b.add_var("b" + std::to_string(i), 0.0, 1.0);
      b.mark_binary(v);
      bins.push_back(v);
    }
    for (int i = 0; i < n; ++i) {
      b.add_quad(cont[i], cont[i], 0.5 + 0.5 * std::abs(un(rng)));
      b.add_lin(cont[i], un(rng));
    }
    for (int i = 0; i < nb; ++i) b.add_lin(bins[i], un(rng));
    // Couple continuous vars to binaries.
    for (int i = 0; i < nb; ++i)
      b.add_row(-kInf, {{cont[i % n], 1.0}, {bins[i], -2.5}}, 0.5);
    QpProblem p = b.build();

    MiqpSettings ms;
    ms.qp = tightqp();
    ms.tol = 1e-8;
    auto sol = solve_miqp_bb(p, ms);
    REQUIRE(sol.ok());

    // Enumerate all binary patterns with plain QPs.
    double best = kInf;
    for (int pat = 0; pat < (1 << nb); ++pat) {
      QpProblem fixed = p;
      fixed.binary_vars.clear();
      for (int i = 0; i < nb; ++i) {
        const double v = (pat >> i) & 1;
        fixed.lower[bins[i]] = v;
        fixed.upper[bins[i]] = v;
      }
      auto qs = solve_qp(fixed, tightqp());
      if (qs.ok()) best = std::min(best, qs.objective);
    }
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("bb: incumbent never worsens, popped bounds grow") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  QpBuilder b;
  std::vector<int> bins;
  for (int i = 0; i < 4; ++i) {
    int x = b.add_var("x" + std::to_string(i), -2.0, 2.0);
    int v = b.add_var("b" + std::to_string(i), 0.0, 1.0);
    b.mark_binary(v);
    bins.push_back(v);
    b.add_quad(x, x, 1.0);
    b.add_lin(x, un(rng));
    b.add_lin(v, un(rng));
    b.add_row(-kInf, {{x, 1.0}, {v, -1.3}}, 0.7);
  }
  MiqpSettings ms;
  ms.qp = tightqp();
  double last_bound = -kInf;
  double last_inc = kInf;
  bool monotone_bound = true, monotone_inc = true;
  ms.on_node = [&](int, double bound, double inc) {
    if (bound < last_bound - 1e-9) monotone_bound = false;
    last_bound = std::max(last_bound, bound);
    if (inc > last_inc + 1e-9) monotone_inc = false;
    last_inc = std::min(last_inc, inc);
  };
  auto sol = solve_miqp_bb(b.build(), ms);
  REQUIRE(sol.ok());
  CHECK(monotone_bound);
  CHECK(monotone_inc);
  CHECK(sol.best_bound <= sol.objective + 1e-9);
}

TEST_CASE("bb: node limit returns incumbent with gap") {
  QpBuilder b;
  std::vector<int> bins;
  for (int i = 0; i < 6; ++i) {
    int v = b.add_var("b" + std::to_string(i), 0.0, 1.0);
    b.mark_binary(v);
    bins.push_back(v);
    b.add_quad(v, v, 1.0);
    b.add_lin(v, -0.9 - 0.02 * i);
  }
  // Knapsack-ish coupling keeps it from solving at the root.
  std::vector<std::pair<int, double>> row;
  for (int i = 0; i < 6; ++i) row.push_back({bins[i], 1.0});
  b.add_row(-kInf, row, 3.0);
  MiqpSettings ms;
  ms.qp = tightqp();
  ms.node_limit = 2;
  ms.warn_large = false;
  auto sol = solve_miqp_bb(b.build(), ms);
  CHECK(sol.nodes <= 2);
  if (sol.status == SolveStatus::max_iter) CHECK(sol.gap > 0.0);
}
