#include "v2gflex/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace v2g {

const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::none: return "none";
    case ObjectiveKind::energy_cost: return "energy_cost";
    case ObjectiveKind::self_consumption: return "self_consumption";
    case ObjectiveKind::fast_charge: return "fast_charge";
    case ObjectiveKind::peak_shave: return "peak_shave";
    case ObjectiveKind::track_profile: return "track_profile";
    case ObjectiveKind::intraday_cost: return "intraday_cost";
    case ObjectiveKind::flex_linear: return "flex_linear";
  }
  return "none";
}

ObjectiveKind objective_kind_from_string(const std::string& s) {
  for (auto k : {ObjectiveKind::none, ObjectiveKind::energy_cost, ObjectiveKind::self_consumption,
                 ObjectiveKind::fast_charge, ObjectiveKind::peak_shave, ObjectiveKind::track_profile,
                 ObjectiveKind::intraday_cost, ObjectiveKind::flex_linear})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown objective kind: " + s);
}

void ObjectiveSpec::validate(int T) const {
  auto need_len = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) != T)
      throw std::invalid_argument(std::string("ObjectiveSpec: ") + name + " length != T");
  };
  switch (kind) {
    case ObjectiveKind::track_profile:
      need_len(reference, "reference");
      break;
    case ObjectiveKind::flex_linear:
      need_len(reference, "reference");
      if (flex_price_mwh < 0.0)
        throw std::invalid_argument("ObjectiveSpec: negative flexibility price");
      for (int t : flex_steps)
        if (t < 0 || t >= T) throw std::invalid_argument("ObjectiveSpec: flex step out of range");
      break;
    case ObjectiveKind::fast_charge:
      if (!discount.empty()) {
        need_len(discount, "discount");
        for (double d : discount)
          if (d <= 0.0) throw std::invalid_argument("ObjectiveSpec: discount must be positive");
      }
      break;
    case ObjectiveKind::intraday_cost:
      need_len(buy_price, "buy_price");
      need_len(sell_price, "sell_price");
      for (int t = 0; t < T; ++t)
        if (sell_price[t] > buy_price[t])
          throw std::invalid_argument("ObjectiveSpec: intraday sell price above buy price");
      break;
    default:
      break;
  }
}

std::vector<double> effective_discount(const ObjectiveSpec& spec, int T) {
  if (!spec.discount.empty()) return spec.discount;
  std::vector<double> d(T);
  for (int t = 0; t < T; ++t) d[t] = static_cast<double>(t + 1) / T;
  return d;
}

std::vector<int> hour_to_steps(int hour, double dt_h, int T) {
  std::vector<int> steps;
  for (int t = 0; t < T; ++t) {
    const int h = static_cast<int>(std::floor(t * dt_h)) % 24;
    if (h == hour) steps.push_back(t);
  }
  return steps;
}

namespace {

int build_epigraph_cost(QpBuilder& b, const std::vector<double>& buy,
                        const std::vector<double>& sell, int p0, int T, double dt_h,
                        const std::string& prefix) {
  for (int t = 0; t < T; ++t)
    if (sell[t] > buy[t])
      throw std::invalid_argument("energy cost epigraph requires p_sell <= p_buy");
  const int y0 = b.add_vars(prefix, T, -kInf, kInf);
  for (int t = 0; t < T; ++t) {
    b.add_row(0.0, {{y0 + t, 1.0}, {p0 + t, -buy[t]}}, kInf);
    b.add_row(0.0, {{y0 + t, 1.0}, {p0 + t, -sell[t]}}, kInf);
    b.add_lin(y0 + t, dt_h);
  }
  return y0;
}

} // namespace

int build_station_objective(QpBuilder& b, const ObjectiveSpec& spec,
                            const StationSpec& station, int p0, int T, double dt_h) {
  switch (spec.kind) {
    case ObjectiveKind::none:
      return -1;
    case ObjectiveKind::energy_cost:
      return build_epigraph_cost(b, station.buy_price, station.sell_price, p0, T, dt_h,
                                 "y_s" + std::to_string(station.id));
    case ObjectiveKind::self_consumption:
      for (int t = 0; t < T; ++t) b.add_lin(p0 + t, 1.0);
      return -1;
    case ObjectiveKind::fast_charge: {
      const auto d = effective_discount(spec, T);
      for (int t = 0; t < T; ++t) b.add_lin(p0 + t, d[t]);
      return -1;
    }
    case ObjectiveKind::peak_shave:
      for (int t = 0; t < T; ++t) b.add_quad(p0 + t, p0 + t, 1.0);
      return -1;
    default:
      throw std::invalid_argument(std::string("objective kind ") + to_string(spec.kind) +
                                  " is not a station objective");
  }
}

void build_system_objective(QpBuilder& b, const ObjectiveSpec& spec, int g0, int T,
                            double dt_h) {
  switch (spec.kind) {
    case ObjectiveKind::none:
      return;
    case ObjectiveKind::track_profile:
      for (int t = 0; t < T; ++t) {
        b.add_quad(g0 + t, g0 + t, 1.0);
        b.add_lin(g0 + t, -2.0 * spec.reference[t]);
        b.add_const(spec.reference[t] * spec.reference[t]);
      }
      return;
    case ObjectiveKind::intraday_cost:
      build_epigraph_cost(b, spec.buy_price, spec.sell_price, g0, T, dt_h, "y_sys");
      return;
    case ObjectiveKind::flex_linear: {
      // |r - g| via two non-negative slacks: g + a - b = r, cost on a + b.
      // Priced on energy: p_f [currency/MWh] * deviation [kW] * dt [h] / 1000.
      const double w = spec.flex_price_mwh * dt_h / 1000.0;
      for (int t : spec.flex_steps) {
        const int a = b.add_var("flex_up[" + std::to_string(t) + "]", 0.0, kInf);
        const int bb = b.add_var("flex_dn[" + std::to_string(t) + "]", 0.0, kInf);
        b.add_row(spec.reference[t], {{g0 + t, 1.0}, {a, 1.0}, {bb, -1.0}},
                  spec.reference[t]);
        b.add_lin(a, w);
        b.add_lin(bb, w);
      }
      return;
    }
    default:
      throw std::invalid_argument(std::string("objective kind ") + to_string(spec.kind) +
                                  " is not a system objective");
  }
}

void build_soc_penalty(QpBuilder& b, const Eigen::SparseMatrix<double>& e,
                       const std::function<int(int, int)>& x_var, double k) {
  if (k <= 0.0) throw std::invalid_argument("soc penalty weight must be positive");
  for (int v = 0; v < e.outerSize(); ++v) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(e, v); it; ++it) {
      if (it.value() <= 0.0) continue;
      const int t = static_cast<int>(it.row());
      const int s = b.add_var("soc_slack[" + std::to_string(t) + "," + std::to_string(v) + "]",
                              0.0, kInf);
      // s >= e - x_{t+1}
      b.add_row(it.value(), {{s, 1.0}, {x_var(t + 1, v), 1.0}}, kInf);
      b.add_quad(s, s, k);
    }
  }
}

void build_cost_budget_row(QpBuilder& b, int y0, int T, double dt_h, double budget,
                           double tol) {
  std::vector<std::pair<int, double>> coeffs;
  coeffs.reserve(T);
  for (int t = 0; t < T; ++t) coeffs.push_back({y0 + t, dt_h});
  const double cap = budget + tol * std::abs(budget) + 1e-9;
  b.add_row(-kInf, coeffs, cap);
}

double eval_station_objective(const ObjectiveSpec& spec, const StationSpec& station,
                              const Eigen::VectorXd& p, double dt_h) {
  const int T = static_cast<int>(p.size());
  switch (spec.kind) {
    case ObjectiveKind::none:
      return 0.0;
    case ObjectiveKind::energy_cost: {
      double c = 0.0;
      for (int t = 0; t < T; ++t)
        c += std::max(station.buy_price[t] * p[t], station.sell_price[t] * p[t]) * dt_h;
      return c;
    }
    case ObjectiveKind::self_consumption:
      return p.sum();
    case ObjectiveKind::fast_charge: {
      const auto d = effective_discount(spec, T);
      double c = 0.0;
      for (int t = 0; t < T; ++t) c += d[t] * p[t];
      return c;
    }
    case ObjectiveKind::peak_shave:
      return p.squaredNorm();
    default:
      throw std::invalid_argument("not a station objective");
  }
}

double eval_system_objective(const ObjectiveSpec& spec, const Eigen::VectorXd& g,
                             double dt_h) {
  const int T = static_cast<int>(g.size());
  switch (spec.kind) {
    case ObjectiveKind::none:
      return 0.0;
    case ObjectiveKind::track_profile: {
      double c = 0.0;
      for (int t = 0; t < T; ++t) c += (g[t] - spec.reference[t]) * (g[t] - spec.reference[t]);
      return c;
    }
    case ObjectiveKind::intraday_cost: {
      double c = 0.0;
      for (int t = 0; t < T; ++t)
        c += std::max(spec.buy_price[t] * g[t], spec.sell_price[t] * g[t]) * dt_h;
      return c;
    }
    case ObjectiveKind::flex_linear: {
      double c = 0.0;
      for (int t : spec.flex_steps)
        c += spec.flex_price_mwh * dt_h / 1000.0 * std::abs(spec.reference[t] - g[t]);
      return c;
    }
    default:
      throw std::invalid_argument("not a system objective");
  }
}

double eval_soc_penalty(const ScenarioTimeline& tl, const Eigen::MatrixXd& x, double k) {
  double q = 0.0;
  for (int v = 0; v < tl.n_vehicles(); ++v) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(tl.e, v); it; ++it) {
      if (it.value() <= 0.0) continue;
      const double shortfall = std::max(it.value() - x(it.row() + 1, v), 0.0);
      q += k * shortfall * shortfall;
    }
  }
  return q;
}

} // namespace v2g
