#include "v2gflex/tune.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "v2gflex/scenario.hpp"

namespace v2g {

TuneResult tune_relaxation(const TuneConfig& cfg, AdmmParams base) {
  if (cfg.mode != BilinearMode::taylor && cfg.mode != BilinearMode::wang)
    throw std::invalid_argument("tune_relaxation: mode must be taylor or wang");

  Scenario sc = generate_scenario(cfg.n_stations, cfg.vehicles_per_station, cfg.horizon,
                                  cfg.dt_h, cfg.seed, carsharing_usage_profile());
  sc.objectives.station.kind = ObjectiveKind::energy_cost;
  sc.objectives.system.kind = ObjectiveKind::track_profile;
  sc.objectives.system.reference.assign(cfg.horizon, 0.0);

  base.threads = cfg.threads;

  FormulationOptions iopts;
  iopts.bilinear_mode = BilinearMode::integer_vars;
  AdmmResult ref = run_admm(sc, iopts, base);
  const double j_ref = ref.schedule.objective();

  TuneResult out;
  out.mode = cfg.mode;
  out.reference_objective = j_ref;

  std::mt19937_64 rng(cfg.seed ^ 0xabcdef1234567890ULL);
  auto u01 = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto log_uniform = [&](double lo, double hi) {
    return lo * std::exp(u01() * std::log(hi / lo));
  };

  FormulationOptions ropts;
  ropts.bilinear_mode = cfg.mode;

  out.best.jc_gap = kInf;
  for (int i = 0; i < cfg.samples; ++i) {
    TuneTrial trial;
    trial.rho_b = log_uniform(cfg.rho_b_min, cfg.rho_b_max);
    trial.gamma_b = cfg.mode == BilinearMode::taylor
                        ? log_uniform(cfg.gamma_b_min, cfg.gamma_b_max)
                        : base.gamma_b;
    trial.alpha = cfg.search_alpha && cfg.mode == BilinearMode::taylor ? 0.5 + 0.5 * u01()
                                                                       : base.alpha;
    AdmmParams p = base;
    p.rho_b = trial.rho_b;
    p.gamma_b = trial.gamma_b;
    p.alpha = trial.alpha;

    const auto t0 = std::chrono::steady_clock::now();
    try {
      AdmmResult r = run_admm(sc, ropts, p);
      trial.jc_gap = std::abs(r.schedule.objective() - j_ref) /
                     std::max(1e-12, std::abs(j_ref));
      trial.compl_residual = r.run.history.empty()
                                 ? 0.0
                                 : r.run.history.back().compl_residual;
      trial.iterations = r.run.iterations;
    } catch (const std::exception&) {
      trial.jc_gap = kInf;
    }
    trial.time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.trials.push_back(trial);

    const bool ok_compl = trial.compl_residual <= 1e-4;
    const bool best_ok = out.best.compl_residual <= 1e-4;
    if ((ok_compl && (!best_ok || trial.jc_gap < out.best.jc_gap)) ||
        (!best_ok && !ok_compl && trial.jc_gap < out.best.jc_gap))
      out.best = trial;
  }
  return out;
}

void TuneResult::to_csv(std::ostream& os) const {
  os << "rho_b,gamma_b,alpha,jc_gap,compl_residual,iterations,time_s\n";
  for (const auto& t : trials)
    os << t.rho_b << "," << t.gamma_b << "," << t.alpha << "," << t.jc_gap << ","
       << t.compl_residual << "," << t.iterations << "," << t.time_s << "\n";
}

} // namespace v2g
