#include "v2gflex/branch_bound.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <queue>
#include <vector>

namespace v2g {

namespace {

struct Node {
  std::vector<int8_t> fix; // -1 free, 0/1 fixed
  double bound;            // inherited lower bound (parent relaxation value)
  Eigen::VectorXd wx, wy;  // warm start carried from the parent
  int depth = 0;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const { return a.bound > b.bound; }
};

} // namespace

QpSolution branch_and_bound_on(SplittingQpSolver& solver, const Eigen::VectorXd& base_l,
                               const Eigen::VectorXd& base_u,
                               const std::vector<int>& binary_rows,
                               const std::vector<int>& binary_vars, int n_vars,
                               const MiqpSettings& settings, const Eigen::VectorXd* warm_x,
                               const Eigen::VectorXd* warm_y) {
  const int nb = static_cast<int>(binary_vars.size());

  const auto t_start = std::chrono::steady_clock::now();
  auto out_of_time = [&]() {
    if (settings.time_limit_s <= 0.0) return false;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count() >
           settings.time_limit_s;
  };

  auto solve_with = [&](const std::vector<int8_t>& fix, const Eigen::VectorXd* wx,
                        const Eigen::VectorXd* wy) {
    Eigen::VectorXd l = base_l, u = base_u;
    for (int i = 0; i < nb; ++i) {
      if (fix[i] >= 0) {
        l[binary_rows[i]] = fix[i];
        u[binary_rows[i]] = fix[i];
      }
    }
    solver.update_bounds(l, u);
    if (wx && wy && wx->size() == n_vars)
      solver.warm_start(*wx, *wy);
    else
      solver.cold_start();
    return solver.solve();
  };

  QpSolution incumbent;
  bool has_incumbent = false;
  double pruned_floor = kInf; // least bound discarded by tolerance pruning
  int nodes = 0;
  int qp_iters_total = 0;

  auto prune_slack = [&]() {
    return has_incumbent ? settings.tol * std::max(1.0, std::abs(incumbent.objective)) : 0.0;
  };

  auto try_heuristic = [&](const QpSolution& relax) {
    std::vector<int8_t> fix(nb);
    for (int i = 0; i < nb; ++i)
      fix[i] = relax.x[binary_vars[i]] >= 0.5 ? int8_t{1} : int8_t{0};
    QpSolution h = solve_with(fix, &relax.x, &relax.y);
    qp_iters_total += h.iterations;
    if (h.status == SolveStatus::optimal &&
        (!has_incumbent || h.objective < incumbent.objective)) {
      incumbent = h;
      has_incumbent = true;
    }
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  {
    Node root{std::vector<int8_t>(nb, -1), -kInf, {}, {}, 0};
    if (warm_x && warm_y) {
      root.wx = *warm_x;
      root.wy = *warm_y;
    }
    open.push(std::move(root));
  }

  bool hit_limit = false;
  while (!open.empty()) {
    if (nodes >= settings.node_limit || out_of_time()) {
      hit_limit = true;
      break;
    }
    Node node = open.top();
    open.pop();

    if (has_incumbent && node.bound >= incumbent.objective - prune_slack()) {
      pruned_floor = std::min(pruned_floor, node.bound);
      continue;
    }

    ++nodes;
    QpSolution relax = solve_with(node.fix, node.wx.size() ? &node.wx : nullptr,
                                  node.wy.size() ? &node.wy : nullptr);
    qp_iters_total += relax.iterations;
    if (settings.on_node)
      settings.on_node(nodes, node.bound, has_incumbent ? incumbent.objective : kInf);
    if (relax.status == SolveStatus::primal_infeasible) continue;
    if (relax.status == SolveStatus::dual_infeasible) {
      relax.best_bound = -kInf;
      relax.gap = kInf;
      relax.nodes = nodes;
      return relax; // MIQP inherits unboundedness of the relaxation
    }
    const double bound = relax.objective;
    if (has_incumbent && bound >= incumbent.objective - prune_slack()) {
      pruned_floor = std::min(pruned_floor, bound);
      continue;
    }

    // Most fractional free binary, lowest index on ties.
    int branch_var = -1;
    double worst = settings.int_tol;
    for (int i = 0; i < nb; ++i) {
      if (node.fix[i] >= 0) continue;
      const double v = relax.x[binary_vars[i]];
      const double fr = std::abs(v - std::round(v));
      if (fr > worst) {
        worst = fr;
        branch_var = i;
      }
    }

    if (branch_var < 0) {
      // Integral relaxation: feasible for the MIQP as-is. Only converged
      // solves may become incumbents.
      if (relax.status == SolveStatus::optimal &&
          (!has_incumbent || relax.objective < incumbent.objective)) {
        incumbent = relax;
        has_incumbent = true;
      }
      continue;
    }

    if (node.depth <= 2) try_heuristic(relax);

    Node child0{node.fix, bound, relax.x, relax.y, node.depth + 1};
    child0.fix[branch_var] = 0;
    Node child1{node.fix, bound, relax.x, relax.y, node.depth + 1};
    child1.fix[branch_var] = 1;
    open.push(std::move(child0));
    open.push(std::move(child1));
  }

  // Global lower bound: open nodes (best-first keeps the least on top),
  // tolerance-pruned nodes, or the incumbent itself when the tree is proven.
  double final_bound = kInf;
  if (!open.empty()) final_bound = std::min(final_bound, open.top().bound);
  final_bound = std::min(final_bound, pruned_floor);
  if (has_incumbent) final_bound = std::min(final_bound, incumbent.objective);

  if (!has_incumbent) {
    QpSolution s;
    s.status = hit_limit ? SolveStatus::max_iter : SolveStatus::primal_infeasible;
    s.nodes = nodes;
    s.best_bound = final_bound;
    s.gap = kInf;
    return s;
  }

  incumbent.nodes = nodes;
  incumbent.best_bound = final_bound;
  incumbent.gap =
      (incumbent.objective - final_bound) / std::max(1.0, std::abs(incumbent.objective));
  incumbent.status = (!hit_limit || incumbent.gap <= settings.tol) ? SolveStatus::optimal
                                                                   : SolveStatus::max_iter;
  incumbent.iterations = qp_iters_total;
  return incumbent;
}

QpSolution solve_miqp_bb(const QpProblem& p, const MiqpSettings& settings) {
  p.validate();
  if (p.binary_vars.empty()) return solve_qp(p, settings.qp);

  const int nb = static_cast<int>(p.binary_vars.size());
  if (settings.warn_large && nb > 40)
    std::cerr << "solve_miqp_bb: " << nb
              << " binary variables exceeds the desk-scale guard (40); expect long runtimes\n";

  // Augment with one bound row per binary so nodes can pin them.
  QpProblem aug = p;
  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(aug.A.nonZeros() + nb);
    for (int k = 0; k < aug.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(aug.A, k); it; ++it)
        t.emplace_back(it.row(), it.col(), it.value());
    const int m0 = aug.m();
    for (int i = 0; i < nb; ++i) t.emplace_back(m0 + i, p.binary_vars[i], 1.0);
    Eigen::SparseMatrix<double> A2(m0 + nb, aug.n);
    A2.setFromTriplets(t.begin(), t.end());
    aug.A = std::move(A2);
    aug.lower.conservativeResize(m0 + nb);
    aug.upper.conservativeResize(m0 + nb);
    for (int i = 0; i < nb; ++i) {
      aug.lower[m0 + i] = 0.0;
      aug.upper[m0 + i] = 1.0;
    }
  }

  std::vector<int> binary_rows(nb);
  for (int i = 0; i < nb; ++i) binary_rows[i] = p.m() + i;

  SplittingQpSolver solver(aug, settings.qp);
  return branch_and_bound_on(solver, aug.lower, aug.upper, binary_rows, p.binary_vars,
                             p.n, settings);
}

QpSolution solve_miqp_bb(const QpProblem& p, double tol, int node_limit) {
  MiqpSettings s;
  s.tol = tol;
  s.node_limit = node_limit;
  return solve_miqp_bb(p, s);
}

} // namespace v2g
