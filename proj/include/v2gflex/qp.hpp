#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <string>
#include <vector>

#include "v2gflex/common.hpp"

namespace v2g {

/// Canonical sparse quadratic program
///   min 1/2 x'Px + q'x + c0   s.t.   lower <= Ax <= upper,
/// with an optional set of variables annotated as binary. Equality rows are
/// expressed as lower == upper. Variable bounds are ordinary rows.
struct QpProblem {
  int n = 0;
  Eigen::SparseMatrix<double> P; // n x n, symmetric PSD, both triangles stored
  Eigen::VectorXd q;
  double c0 = 0.0;
  Eigen::SparseMatrix<double> A; // m x n
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> binary_vars;
  std::vector<std::string> var_names; // diagnostics; may be empty

  int m() const { return static_cast<int>(A.rows()); }
  double objective_at(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(P * x) + q.dot(x) + c0;
  }
  void validate() const; // throws std::invalid_argument

  /// Plain-text sparse triplet dump for cross-checking with external solvers.
  void export_triplets(std::ostream& os) const;
};

enum class SolveStatus { optimal, max_iter, primal_infeasible, dual_infeasible };

const char* to_string(SolveStatus s);

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y; // row duals
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  // Populated by the branch-and-bound driver only.
  double best_bound = 0.0;
  double gap = 0.0;
  int nodes = 0;

  bool ok() const { return status == SolveStatus::optimal; }
};

/// Incremental assembler for QpProblem. Registers named variables, collects
/// quadratic/linear cost terms and constraint rows, then emits the problem.
class QpBuilder {
 public:
  int add_var(std::string name, double lo, double hi);
  int add_vars(const std::string& prefix, int count, double lo, double hi);

  void set_bounds(int var, double lo, double hi);
  void add_quad(int i, int j, double coeff); // adds coeff * x_i * x_j to the cost
  void add_lin(int i, double coeff);
  void add_const(double c) { c0_ += c; }
  void mark_binary(int var) { binaries_.push_back(var); }

  /// Adds the row lo <= sum coeffs[k].second * x_{coeffs[k].first} <= hi.
  int add_row(double lo, const std::vector<std::pair<int, double>>& coeffs, double hi);

  int n_vars() const { return n_; }
  double var_lower(int v) const { return var_lo_[v]; }
  double var_upper(int v) const { return var_hi_[v]; }

  QpProblem build() const;

 private:
  int n_ = 0;
  std::vector<std::string> names_;
  std::vector<double> var_lo_, var_hi_;
  std::vector<Eigen::Triplet<double>> p_trip_; // upper-triangular accumulation
  std::vector<double> q_;
  double c0_ = 0.0;
  std::vector<Eigen::Triplet<double>> a_trip_;
  std::vector<double> row_lo_, row_hi_;
  std::vector<int> binaries_;
};

} // namespace v2g
