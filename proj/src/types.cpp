#include "v2gflex/types.hpp"

#include <stdexcept>

namespace v2g {
namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

} // namespace

void VehicleSpec::validate() const {
  if (!(0.0 <= min_soc_kwh && min_soc_kwh <= initial_soc_kwh && initial_soc_kwh <= capacity_kwh))
    fail("vehicle " + id + ": need 0 <= x_min <= x_start <= x_max");
  if (max_charge_kw < 0.0 || max_discharge_kw < 0.0)
    fail("vehicle " + id + ": power limits must be non-negative");
  if (eta_ch <= 0.0 || eta_ch > 1.0 || eta_ds <= 0.0 || eta_ds > 1.0)
    fail("vehicle " + id + ": efficiencies must lie in (0, 1]");
  if (!(tau_sd_h > 0.0)) fail("vehicle " + id + ": tau_sd_h must be positive");
  if (consumption_kwh_per_km < 0.0) fail("vehicle " + id + ": negative consumption");
}

void StationSpec::validate(int T) const {
  if (n_max_chargers < 1) fail("station " + std::to_string(id) + ": n_max_chargers < 1");
  if (!(p_max_kw > 0.0)) fail("station " + std::to_string(id) + ": p_max_kw must be positive");
  if (!std::isnan(p_min_kw) && p_min_kw > p_max_kw)
    fail("station " + std::to_string(id) + ": p_min_kw > p_max_kw");
  auto check_len = [&](const std::vector<double>& s, const char* name) {
    if (static_cast<int>(s.size()) != T)
      fail("station " + std::to_string(id) + ": series " + name + " length != T");
  };
  check_len(base_load_kw, "base_load_kw");
  check_len(pv_kw, "pv_kw");
  check_len(buy_price, "buy_price");
  check_len(sell_price, "sell_price");
  for (double v : base_load_kw)
    if (v < 0.0) fail("station " + std::to_string(id) + ": negative base load");
  for (double v : pv_kw)
    if (v < 0.0) fail("station " + std::to_string(id) + ": negative PV");
  for (int t = 0; t < T; ++t)
    if (sell_price[t] > buy_price[t])
      fail("station " + std::to_string(id) + ": p_sell > p_buy at step " + std::to_string(t));
}

void ScenarioTimeline::validate() const {
  if (T < 2) fail("timeline: T must be at least 2");
  if (dt_h <= 0.0) fail("timeline: dt_h must be positive");
  if (l.rows() != T) fail("timeline: l has wrong number of rows");
  if (e.rows() != T || e.cols() != l.cols()) fail("timeline: e dimensions mismatch");
  if (delta_e.rows() != T || delta_e.cols() != l.cols())
    fail("timeline: delta_e dimensions mismatch");
  for (int v = 0; v < n_vehicles(); ++v) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(e, v); it; ++it)
      if (it.value() < 0.0) fail("timeline: negative e entry");
    for (Eigen::SparseMatrix<double>::InnerIterator it(delta_e, v); it; ++it)
      if (it.value() < 0.0) fail("timeline: negative delta_e entry");
  }
}

} // namespace v2g
