#include "v2gflex/qp.hpp"

#include <ostream>
#include <stdexcept>

namespace v2g {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::primal_infeasible: return "infeasible";
    case SolveStatus::dual_infeasible: return "unbounded";
  }
  return "unknown";
}

void QpProblem::validate() const {
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument("QpProblem: P shape");
  if (q.size() != n) throw std::invalid_argument("QpProblem: q size");
  if (A.cols() != n) throw std::invalid_argument("QpProblem: A shape");
  if (lower.size() != A.rows() || upper.size() != A.rows())
    throw std::invalid_argument("QpProblem: bounds size");
  for (int i = 0; i < m(); ++i)
    if (lower[i] > upper[i]) throw std::invalid_argument("QpProblem: lower > upper");
  for (int b : binary_vars)
    if (b < 0 || b >= n) throw std::invalid_argument("QpProblem: binary index out of range");
  // Symmetry check (pattern-wise cheap, value-wise exact).
  Eigen::SparseMatrix<double> D = Eigen::SparseMatrix<double>(P.transpose()) - P;
  if (D.coeffs().size() > 0 && D.coeffs().cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("QpProblem: P not symmetric");
  for (int k = 0; k < n; ++k)
    if (P.coeff(k, k) < -1e-12) throw std::invalid_argument("QpProblem: negative diagonal in P");
}

void QpProblem::export_triplets(std::ostream& os) const {
  os << "n " << n << "\nm " << m() << "\nc0 " << c0 << "\n";
  os << "P " << P.nonZeros() << "\n";
  for (int k = 0; k < P.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(P, k); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
  os << "q\n";
  for (int i = 0; i < n; ++i) os << q[i] << "\n";
  os << "A " << A.nonZeros() << "\n";
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
  os << "bounds\n";
  for (int i = 0; i < m(); ++i) os << lower[i] << " " << upper[i] << "\n";
  os << "binary " << binary_vars.size() << "\n";
  for (int b : binary_vars) os << b << "\n";
}

int QpBuilder::add_var(std::string name, double lo, double hi) {
  names_.push_back(std::move(name));
  var_lo_.push_back(lo);
  var_hi_.push_back(hi);
  q_.push_back(0.0);
  return n_++;
}

int QpBuilder::add_vars(const std::string& prefix, int count, double lo, double hi) {
  const int first = n_;
  for (int i = 0; i < count; ++i) add_var(prefix + "[" + std::to_string(i) + "]", lo, hi);
  return first;
}

void QpBuilder::set_bounds(int var, double lo, double hi) {
  var_lo_[var] = lo;
  var_hi_[var] = hi;
}

void QpBuilder::add_quad(int i, int j, double coeff) {
  if (coeff == 0.0) return;
  // Store upper triangle; build() mirrors it.
  if (i <= j)
    p_trip_.emplace_back(i, j, coeff);
  else
    p_trip_.emplace_back(j, i, coeff);
}

void QpBuilder::add_lin(int i, double coeff) { q_[i] += coeff; }

int QpBuilder::add_row(double lo, const std::vector<std::pair<int, double>>& coeffs, double hi) {
  const int r = static_cast<int>(row_lo_.size());
  for (const auto& [v, c] : coeffs)
    if (c != 0.0) a_trip_.emplace_back(r, v, c);
  row_lo_.push_back(lo);
  row_hi_.push_back(hi);
  return r;
}

QpProblem QpBuilder::build() const {
  QpProblem p;
  p.n = n_;
  p.var_names = names_;
  p.binary_vars = binaries_;
  p.c0 = c0_;
  p.q = Eigen::Map<const Eigen::VectorXd>(q_.data(), n_);

  // P: mirror the upper-triangular accumulation into a full symmetric matrix.
  // x'Px/2 convention: add_quad(i,j,c) contributes c*x_i*x_j, so P_ij = P_ji = c
  // for i != j and P_ii = 2c for the diagonal.
  std::vector<Eigen::Triplet<double>> full;
  full.reserve(p_trip_.size() * 2);
  for (const auto& t : p_trip_) {
    if (t.row() == t.col()) {
      full.emplace_back(t.row(), t.col(), 2.0 * t.value());
    } else {
      full.emplace_back(t.row(), t.col(), t.value());
      full.emplace_back(t.col(), t.row(), t.value());
    }
  }
  p.P.resize(n_, n_);
  p.P.setFromTriplets(full.begin(), full.end());

  // Variable bounds become one identity block ahead of the structural rows.
  const int m_struct = static_cast<int>(row_lo_.size());
  std::vector<Eigen::Triplet<double>> a;
  a.reserve(a_trip_.size() + n_);
  for (int i = 0; i < n_; ++i) a.emplace_back(i, i, 1.0);
  for (const auto& t : a_trip_) a.emplace_back(t.row() + n_, t.col(), t.value());
  p.A.resize(n_ + m_struct, n_);
  p.A.setFromTriplets(a.begin(), a.end());
  p.lower.resize(n_ + m_struct);
  p.upper.resize(n_ + m_struct);
  for (int i = 0; i < n_; ++i) {
    p.lower[i] = var_lo_[i];
    p.upper[i] = var_hi_[i];
  }
  for (int r = 0; r < m_struct; ++r) {
    p.lower[n_ + r] = row_lo_[r];
    p.upper[n_ + r] = row_hi_[r];
  }
  return p;
}

} // namespace v2g
