#pragma once

#include <functional>
#include <string>
#include <vector>

#include "v2gflex/qp.hpp"
#include "v2gflex/types.hpp"

namespace v2g {

enum class ObjectiveKind {
  none,
  energy_cost,      // station: epigraph over buy/sell tariffs
  self_consumption, // station: sum of net power
  fast_charge,      // station: time-weighted net power
  peak_shave,       // station: squared net power
  track_profile,    // system: quadratic tracking of a reference
  intraday_cost,    // system: epigraph over configured tariffs
  flex_linear,      // system: priced absolute deviation on an hour set
};

const char* to_string(ObjectiveKind k);
ObjectiveKind objective_kind_from_string(const std::string& s);

/// Parameters of one station- or system-level cost term. Which fields are
/// read depends on kind; validate(T) enforces the per-kind requirements.
struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::none;
  std::vector<double> reference;  // r, length T (track_profile, flex_linear)
  std::vector<double> discount;   // d(t), length T; empty = linear ramp 1/T..1
  double flex_price_mwh = 0.0;    // p_f [currency/MWh]
  std::vector<int> flex_steps;    // T_h as step indices
  std::vector<double> buy_price;  // intraday_cost tariffs [currency/kWh]
  std::vector<double> sell_price;

  bool is_none() const { return kind == ObjectiveKind::none; }
  void validate(int T) const;
};

struct ObjectiveConfig {
  ObjectiveSpec station; // C, applied to every station's power profile
  ObjectiveSpec system;  // S, applied to the fleet aggregate
  double soc_penalty_k = 1e4; // k of the soft SOC threshold [currency/kWh^2]
};

/// Effective discount curve for fast_charge (default: ramp increasing with t,
/// so late charging costs more).
std::vector<double> effective_discount(const ObjectiveSpec& spec, int T);

/// Maps an hour of day to the timeline steps it covers.
std::vector<int> hour_to_steps(int hour, double dt_h, int T);

// --- QP term builders -------------------------------------------------------
//
// Each builder appends cost terms (and any auxiliary variables/rows) for a
// profile variable block p[0..T) already registered in the builder. They are
// additive: building two objectives yields the sum of their standalone costs.

/// Station cost C on the block p0..p0+T. For energy_cost this introduces the
/// epigraph variables y >= p_buy*p, y >= p_sell*p and returns their first
/// index; otherwise returns -1.
int build_station_objective(QpBuilder& b, const ObjectiveSpec& spec,
                            const StationSpec& station, int p0, int T, double dt_h);

/// System cost S on the aggregate block g0..g0+T (fleet net power).
void build_system_objective(QpBuilder& b, const ObjectiveSpec& spec, int g0, int T,
                            double dt_h);

/// Soft SOC threshold Q: for each nonzero e(t,v) adds a slack
/// s >= e(t,v) - x_{t+1,v} with cost k*s^2. e(t,v) bounds the state leaving
/// step t, which is x index t+1; x_var maps (state index, vehicle) to the
/// variable id.
void build_soc_penalty(QpBuilder& b, const Eigen::SparseMatrix<double>& e,
                       const std::function<int(int, int)>& x_var, double k);

/// Second stage of the lexicographic peak-shave strategy: keeps stage-one
/// energy cost within (1+tol) of `budget` via a row over the epigraph block.
void build_cost_budget_row(QpBuilder& b, int y0, int T, double dt_h, double budget,
                           double tol);

// --- Direct evaluators ------------------------------------------------------
//
// True cost functions evaluated on realized profiles (no epigraph
// auxiliaries). These back J_c, cost breakdowns and tests.

double eval_station_objective(const ObjectiveSpec& spec, const StationSpec& station,
                              const Eigen::VectorXd& p, double dt_h);
double eval_system_objective(const ObjectiveSpec& spec, const Eigen::VectorXd& fleet_power,
                             double dt_h);
/// Q(x) for the whole fleet given the timeline thresholds.
double eval_soc_penalty(const ScenarioTimeline& tl, const Eigen::MatrixXd& x, double k);

} // namespace v2g
